#include "doctest.h"
#include "oracles.hpp"

#include "rvc/canonical.hpp"
#include "rvc/conflation.hpp"
#include "rvc/errors.hpp"
#include "rvc/polytope.hpp"

#include <cmath>

using namespace rvc;
namespace cn = rvc::canonical;

namespace {

bool has_vertex(const std::vector<Vector>& vs, const Vector& x) {
    for (const auto& v : vs)
        if ((v - x).cwiseAbs().maxCoeff() <= 1e-9)
            return true;
    return false;
}

struct Canon {
    Mdp mdp;
    Vector r;
    Vector v;
};

Canon canon(double m = 20.0, double eps = 1.0 / 15.0) {
    auto [mdp, r] = cn::build({m, eps});
    const Vector v = *cn::optimize(mdp, r).optimal_value;
    return {std::move(mdp), r.values(), v};
}

} // namespace

TEST_SUITE("polytope_geometry") {

TEST_CASE("canonical polytope is a triangle") {
    const auto c = canon();
    const auto poly = compute_polytope(c.mdp);
    REQUIRE(poly.phi_vertices.size() == 3);
    CHECK(has_vertex(poly.phi_vertices, Vector::Unit(3, 0)));
    CHECK(has_vertex(poly.phi_vertices, Vector::Unit(3, 1)));
    CHECK(has_vertex(poly.phi_vertices, cn::aligned_occupancy({20.0, 1.0 / 15.0})));
    for (const auto& psi : poly.psi_vertices) {
        CHECK(flow_residual(c.mdp, psi) <= 1e-10);
        CHECK(psi.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(psi.minCoeff() >= 0.0);
    }
    for (std::size_t i = 0; i < poly.phi_vertices.size(); ++i) {
        const Vector marginal = poly.psi_vertices[poly.phi_source[i]].rowwise().sum();
        CHECK((marginal - poly.phi_vertices[i]).cwiseAbs().maxCoeff() <= 1e-15);
    }
    CHECK(poly.generators.size() == poly.psi_vertices.size());
}

TEST_CASE("degenerate polytopes") {
    const Mdp single({Matrix::Ones(1, 1), Matrix::Ones(1, 1)}, 0);
    const auto point = compute_polytope(single);
    REQUIRE(point.phi_vertices.size() == 1);
    CHECK(point.phi_vertices[0](0) == 1.0);

    Matrix swap(2, 2);
    swap << 0, 1, 1, 0;
    const auto cycle = compute_polytope(Mdp({swap}, 0));
    REQUIRE(cycle.phi_vertices.size() == 1);
    CHECK(cycle.phi_vertices[0](0) == doctest::Approx(0.5));
    CHECK(cycle.phi_vertices[0](1) == doctest::Approx(0.5));
}

TEST_CASE("maximizing over the polytope") {
    const auto c = canon();
    const auto poly = compute_polytope(c.mdp);
    const auto best = maximize_over_phi(poly, c.r);
    CHECK((best.vertex - cn::aligned_occupancy({20.0, 1.0 / 15.0})).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(best.value == doctest::Approx(19.0 / 17).epsilon(1e-12));

    for (double shift : {0.0, 12.0}) {
        const auto proxy = maximize_over_phi(poly, (c.v.array() + shift).matrix());
        CHECK((proxy.vertex - Vector::Unit(3, 1)).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(c.r.dot(proxy.vertex) == doctest::Approx(-1.0));
    }

    const auto flat = maximize_over_phi(poly, Vector::Ones(3));
    CHECK(flat.value == doctest::Approx(1.0));
    CHECK(flat.ties.size() == 3);
}

TEST_CASE("nnls and hull distance") {
    Matrix a(3, 2);
    a << 1, 0, 0, 1, 1, 1;
    Vector b(3);
    b << 2, -1, 1;
    // Unconstrained optimum has a negative coordinate; nnls clamps it.
    const Vector x = nnls(a, b);
    CHECK(x.minCoeff() >= 0.0);
    CHECK(x(1) == 0.0);
    CHECK(x(0) == doctest::Approx(1.5));

    const std::vector<Vector> tri{Vector::Unit(3, 0), Vector::Unit(3, 1), Vector::Unit(3, 2)};
    CHECK(hull_distance(tri, Vector::Constant(3, 1.0 / 3)) <= 1e-12);
    Vector out(3);
    out << 1.5, -0.5, 0;
    CHECK(hull_distance(tri, out) > 0.1);
}

TEST_CASE("geometry export for the canonical example") {
    const auto c = canon();
    const Vector proxy = make_conflated(c.r, c.v, 0.2).values();
    const auto g = export_geometry(c.mdp, c.r, c.v, proxy);
    REQUIRE(g.top_facet);
    CHECK(g.reward_side == Side::aligned);
    REQUIRE(g.proxy_side);
    CHECK(*g.proxy_side == Side::instrumental);
    CHECK(g.side_test_agrees == std::optional<bool>(true));
    CHECK(*g.proxy_argmax == *g.instrumental_vertex);
    CHECK(*g.proxy_cone_vertex == *g.proxy_argmax);
    CHECK(g.phi_area > 0.0);
    for (const auto* d : {&g.reward_projected, &g.value_projected, &*g.proxy_projected})
        CHECK(std::abs(d->sum()) <= 1e-12);
    // Simplex corners: e1 lower-left, e2 lower-right, e3 top.
    CHECK(g.simplex_vertices[1].x == 1.0);
    CHECK(g.simplex_vertices[2].y == doctest::Approx(std::sqrt(3.0) / 2));

    const auto same = export_geometry(c.mdp, c.r, c.v, c.r);
    CHECK(*same.proxy_side == same.reward_side);
    CHECK(same.proxy_direction->x == same.reward_direction.x);
    CHECK(same.proxy_direction->y == same.reward_direction.y);

    CHECK_THROWS_AS(export_geometry(Mdp({Matrix::Identity(2, 2)}, 0), Vector::Zero(2), Vector::Zero(2)),
                    InvalidInput);
}

TEST_CASE("feasible region shrinks with epsilon and the reward straightens with M") {
    const auto area = [](double m, double eps) {
        const auto c = canon(m, eps);
        return export_geometry(c.mdp, c.r, c.v).phi_area;
    };
    const auto tilt = [](double m, double eps) {
        const auto c = canon(m, eps);
        return std::abs(tilt_from_vertical(export_geometry(c.mdp, c.r, c.v).reward_direction));
    };
    for (double m : {5.0, 20.0})
        CHECK(area(m, 1.0 / 15) < area(m, 1.0 / 3));
    for (double eps : {1.0 / 3, 1.0 / 15})
        CHECK(tilt(20.0, eps) < tilt(5.0, eps));
}

TEST_CASE("property: polytope maximum equals the optimal gain") {
    oracle::Random rng(55);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.index(4);
        const std::size_t k = 1 + rng.index(3);
        const Mdp mdp = rng.mdp(n, k);  // dense: every class reachable
        const RewardFunction r(rng.vector(n));
        const auto poly = compute_polytope(mdp);
        REQUIRE(maximize_over_phi(poly, r.values()).value ==
                doctest::Approx(optimize(mdp, r).optimal_gain).epsilon(1e-9));
    }
}

TEST_CASE("property: policy occupancies lie in the hull") {
    oracle::Random rng(56);
    int checked = 0;
    for (int trial = 0; trial < 300 && checked < 100; ++trial) {
        const std::size_t n = 2 + rng.index(3);
        const std::size_t k = 1 + rng.index(3);
        const Mdp mdp = rng.mdp(n, k, rng.uniform(0.0, 0.5));
        const Policy pi(rng.policy(n, k));
        if (!analyze_chain(mdp, pi).is_unichain_from_start)
            continue;
        ++checked;
        const auto poly = compute_polytope(mdp);
        REQUIRE(hull_distance(poly.phi_vertices, occupancy_from_start(mdp, pi)) <= 1e-8);
    }
    CHECK(checked >= 50);
}

TEST_CASE("property: normal-cone vertex is the argmax") {
    oracle::Random rng(57);
    const auto c = canon();
    for (int trial = 0; trial < 200; ++trial) {
        const Vector u = rng.vector(3, -10, 10);
        const auto g = export_geometry(c.mdp, c.r, c.v, u);
        const auto best = maximize_over_phi(compute_polytope(c.mdp), u);
        if (best.ties.size() > 1)
            continue;
        REQUIRE(*g.proxy_cone_vertex == *g.proxy_argmax);
        if (g.side_test_agrees)
            REQUIRE(*g.side_test_agrees);
    }
}

} // TEST_SUITE
