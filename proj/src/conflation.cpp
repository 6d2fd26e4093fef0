#include "rvc/conflation.hpp"

#include "rvc/errors.hpp"

#include <cmath>

namespace rvc {

namespace {

constexpr double kPositiveFloor = 1e-12;

Vector centered(const Vector& g) { return g.array() - g.mean(); }

void check_same_length(const Vector& a, const Vector& b) {
    if (a.size() != b.size())
        throw InvalidInput("vectors have different lengths");
}

} // namespace

double spread(const Vector& g) { return g.size() == 0 ? 0.0 : g.maxCoeff() - g.minCoeff(); }

bool is_constant(const Vector& g, double tol) { return spread(g) <= tol; }

bool is_equivalent(const Vector& g1, const Vector& g2) {
    check_same_length(g1, g2);
    if (g1.size() < 2)
        throw InvalidInput("equivalence needs at least two states");
    const bool c1 = is_constant(g1);
    const bool c2 = is_constant(g2);
    if (c1 || c2)
        return c1 && c2;
    const Vector a = centered(g1);
    const Vector b = centered(g2);
    const double scale = a.dot(b) / b.squaredNorm();
    if (!(scale > 0.0))
        return false;
    return (a - scale * b).lpNorm<Eigen::Infinity>() <= kEquivalenceTol;
}

UniquenessDiagnostics uniqueness_check(const Vector& r, const Vector& v) {
    check_same_length(r, v);
    UniquenessDiagnostics d;
    d.r_constant = is_constant(r);
    d.v_constant = is_constant(v);
    d.r_equiv_v = is_equivalent(r, v);
    d.r_equiv_neg_v = is_equivalent(r, Vector(-v));
    d.beta_unique = !d.r_constant && !d.v_constant && !d.r_equiv_v && !d.r_equiv_neg_v;
    return d;
}

ConflationReport decompose(const Vector& r_hat, const Vector& r, const Vector& v) {
    check_same_length(r_hat, r);
    check_same_length(r, v);
    if (is_equivalent(r, v))
        throw IllPosed("r and v are equivalent; the degree of conflation is not identified");

    // c r_hat + k 1 + beta (r - v) = r
    const auto n = r.size();
    Matrix a(n, 3);
    a.col(0) = r_hat;
    a.col(1).setOnes();
    a.col(2) = r - v;
    const Vector x = a.completeOrthogonalDecomposition().solve(r);

    ConflationReport out;
    out.c = x(0);
    out.k = x(1);
    out.beta = x(2);
    out.residual = (out.c * r_hat.array() + out.k - (1.0 - out.beta) * r.array() - out.beta * v.array())
                       .abs()
                       .maxCoeff();
    out.uniqueness = uniqueness_check(r, v);
    out.is_conflation = out.residual <= kConflationFitTol && out.c > kPositiveFloor &&
                        out.beta > kPositiveFloor && out.beta <= 1.0 + kPositiveFloor;
    return out;
}

RewardFunction make_conflated(const Vector& r, const Vector& v, double beta, double c, double k) {
    check_same_length(r, v);
    if (!(c > 0.0))
        throw InvalidInput("conflation scale c must be positive");
    if (!(beta >= 0.0 && beta <= 1.0))
        throw InvalidInput("degree of conflation must lie in [0, 1]");
    return RewardFunction(Vector(((1.0 - beta) * r.array() + beta * v.array() - k) / c));
}

} // namespace rvc
