#pragma once

#include "rvc/mdp.hpp"

namespace rvc {

/// Max-norm tolerance for affine equivalence of two functions.
inline constexpr double kEquivalenceTol = 1e-9;
/// Spread below which a function counts as constant.
inline constexpr double kConstantSpreadTol = 1e-12;
/// Least-squares residual accepted as an exact conflation.
inline constexpr double kConflationFitTol = 1e-8;

struct UniquenessDiagnostics {
    bool r_constant = false;
    bool v_constant = false;
    bool r_equiv_v = false;
    bool r_equiv_neg_v = false;
    bool beta_unique = false;
};

/**
 * Fit of c * r_hat + k = (1 - beta) r + beta v. The fitted parameters are
 * always reported; is_conflation additionally requires c > 0 and
 * beta in (0, 1] with a residual below kConflationFitTol.
 */
struct ConflationReport {
    bool is_conflation = false;
    double c = 0.0;
    double k = 0.0;
    double beta = 0.0;
    double residual = 0.0;
    UniquenessDiagnostics uniqueness;
};

/// max(g) - min(g)
double spread(const Vector& g);
bool is_constant(const Vector& g, double tol = kConstantSpreadTol);

/// True iff g1 = c g2 + k for some c > 0.
bool is_equivalent(const Vector& g1, const Vector& g2);

UniquenessDiagnostics uniqueness_check(const Vector& r, const Vector& v);

/// Throws IllPosed when r and v are equivalent.
ConflationReport decompose(const Vector& r_hat, const Vector& r, const Vector& v);

/// r_hat = ((1 - beta) r + beta v - k) / c
RewardFunction make_conflated(const Vector& r, const Vector& v, double beta, double c = 1.0,
                              double k = 0.0);

} // namespace rvc
