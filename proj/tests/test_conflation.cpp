#include "doctest.h"
#include "oracles.hpp"

#include "rvc/canonical.hpp"
#include "rvc/conflation.hpp"
#include "rvc/errors.hpp"

#include <cmath>

using namespace rvc;

namespace {

struct Canon {
    Vector r;
    Vector v;
};

Canon canon(double m = 20.0, double eps = 1.0 / 15.0) {
    const auto [mdp, r] = canonical::build({m, eps});
    return {r.values(), *canonical::optimize(mdp, r).optimal_value};
}

Vector vec(std::initializer_list<double> xs) {
    Vector v(Eigen::Index(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs)
        v(i++) = x;
    return v;
}

} // namespace

TEST_SUITE("conflation") {

TEST_CASE("equivalence") {
    const Vector g = vec({1.0, -2.0, 0.5, 4.0});
    CHECK(is_equivalent(g, (2.0 * g.array() + 3.0).matrix()));
    CHECK_FALSE(is_equivalent(g, -g));
    CHECK(is_equivalent(vec({1, 1, 1}), vec({-4, -4, -4})));
    CHECK_FALSE(is_equivalent(vec({1, 1, 1}), vec({1, 2, 3})));
    CHECK_FALSE(is_equivalent(vec({1, 2, 3}), vec({1, 1, 1})));
    CHECK_THROWS_AS(is_equivalent(vec({1, 2}), vec({1, 2, 3})), InvalidInput);

    const auto c = canon();
    CHECK_FALSE(is_equivalent(c.r, c.v));
}

TEST_CASE("decomposition examples") {
    const auto c = canon();
    const auto value = decompose(c.v, c.r, c.v);
    CHECK(value.is_conflation);
    CHECK(value.beta == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(value.c == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(value.k) < 1e-9);

    const auto reward = decompose(c.r, c.r, c.v);
    CHECK_FALSE(reward.is_conflation);
    CHECK(std::abs(reward.beta) < 1e-12);
    CHECK(reward.residual < 1e-9);

    const Vector proxy = (0.5 * ((1 - 0.3) * c.r + 0.3 * c.v)).array() + 7.0;
    const auto mixed = decompose(proxy, c.r, c.v);
    CHECK(mixed.is_conflation);
    CHECK(mixed.beta == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(mixed.c == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(mixed.k == doctest::Approx(-14.0).epsilon(1e-12));
    CHECK(mixed.residual <= kConflationFitTol);

    CHECK_THROWS_AS(decompose(c.r, c.r, (3.0 * c.r.array() + 1.0).matrix()), IllPosed);
}

TEST_CASE("negative scale and beta above one are fitted but not conflation") {
    const auto c = canon();
    const auto neg = decompose((-(0.5 * c.r + 0.5 * c.v)).eval(), c.r, c.v);
    CHECK_FALSE(neg.is_conflation);
    CHECK(neg.c < 0.0);
    const auto over = decompose((-0.5 * c.r + 1.5 * c.v).eval(), c.r, c.v);
    CHECK_FALSE(over.is_conflation);
    CHECK(over.beta == doctest::Approx(1.5));
    // With four states r, V and the constant no longer span everything.
    const Vector r4 = vec({0, -1, 20, 3});
    const Vector v4 = vec({0, 16, 18, -2});
    const auto off = decompose(vec({1, 0, 0, 0}), r4, v4);
    CHECK_FALSE(off.is_conflation);
    CHECK(off.residual > kConflationFitTol);
}

TEST_CASE("make_conflated endpoints and preconditions") {
    const auto c = canon();
    CHECK((make_conflated(c.r, c.v, 0.0).values() - c.r).cwiseAbs().maxCoeff() == 0.0);
    CHECK((make_conflated(c.r, c.v, 1.0).values() - c.v).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(make_conflated(c.r, c.v, 0.5, 0.0), InvalidInput);
    CHECK_THROWS_AS(make_conflated(c.r, c.v, 0.5, -1.0), InvalidInput);
    CHECK_THROWS_AS(make_conflated(c.r, c.v, 1.5), InvalidInput);
    CHECK_THROWS_AS(make_conflated(c.r, c.v, -0.1), InvalidInput);
}

TEST_CASE("beta = 0.05 proxies: aligned at (20, 1/15), severe in the guaranteed regime") {
    // At (M = 20, eps = 1/15) the regime bound eps < beta/3 fails; enumeration
    // shows the proxy still picks the aligned policy.
    {
        const auto [mdp, r] = canonical::build({20.0, 1.0 / 15.0});
        const Vector v = *canonical::optimize(mdp, r).optimal_value;
        const auto opt = canonical::optimize(mdp, make_conflated(r.values(), v, 0.05));
        CHECK(opt.optimal_actions == canonical::policy(canonical::kMove, canonical::kMove));
        CHECK(deterministic_gain(mdp, r.values(), opt.optimal_actions) == doctest::Approx(19.0 / 17));
    }
    {
        const auto [mdp, r] = canonical::build({3601.0, 0.01});
        const Vector v = *canonical::optimize(mdp, r).optimal_value;
        const auto opt = canonical::optimize(mdp, make_conflated(r.values(), v, 0.05));
        CHECK(deterministic_gain(mdp, r.values(), opt.optimal_actions) == doctest::Approx(-1.0).epsilon(1e-12));
    }
}

TEST_CASE("uniqueness diagnostics") {
    const auto [mdp, r] = canonical::build({20.0, 1.0 / 15.0});
    const RewardFunction flat{2, 2, 2};
    const Vector v_flat = *optimize(mdp, flat).optimal_value;
    const auto d = uniqueness_check(flat.values(), v_flat);
    CHECK(d.r_constant);
    CHECK(is_equivalent(flat.values(), v_flat));
    CHECK_FALSE(d.beta_unique);

    const auto c = canon();
    const auto u = uniqueness_check(c.r, c.v);
    CHECK_FALSE(u.v_constant);
    CHECK_FALSE(u.r_constant);
    CHECK_FALSE(u.r_equiv_v);
    CHECK_FALSE(u.r_equiv_neg_v);
    CHECK(u.beta_unique);

    const Vector g = vec({0, 1, 3});
    const auto neg = uniqueness_check(g, (-2.0 * g).eval());
    CHECK(neg.r_equiv_neg_v);
    CHECK_FALSE(neg.beta_unique);
}

TEST_CASE("property: round trip, gauge invariance, difference identity, agreement") {
    oracle::Random rng(1234);
    int checked = 0;
    while (checked < 500) {
        const std::size_t n = 2 + rng.index(5);
        const Vector r = rng.vector(n);
        const Vector v = rng.vector(n, -20.0, 20.0);
        if (!uniqueness_check(r, v).beta_unique)
            continue;
        ++checked;
        const double beta = rng.uniform(1e-3, 1.0);
        const double c = rng.uniform(1e-2, 10.0);
        const double k = rng.uniform(-10.0, 10.0);
        const Vector r_hat = make_conflated(r, v, beta, c, k).values();

        const auto rep = decompose(r_hat, r, v);
        REQUIRE(rep.is_conflation);
        REQUIRE(std::abs(rep.beta - beta) <= 1e-8);
        REQUIRE(std::abs(rep.c - c) <= 1e-8);
        REQUIRE(std::abs(rep.k - k) <= 1e-8);

        const auto shifted = decompose(r_hat, r, (v.array() + rng.uniform(-50.0, 50.0)).matrix());
        REQUIRE(std::abs(shifted.beta - rep.beta) <= 1e-8);

        for (Eigen::Index s = 0; s < r.size(); ++s)
            for (Eigen::Index t = 0; t < r.size(); ++t) {
                const double lhs = rep.c * (r_hat(s) - r_hat(t));
                const double rhs = (1 - rep.beta) * (r(s) - r(t)) + rep.beta * (v(s) - v(t));
                REQUIRE(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(rhs)));
                if (r(s) > r(t) && v(s) > v(t))
                    REQUIRE(r_hat(s) > r_hat(t));
            }
    }
}

} // TEST_SUITE
