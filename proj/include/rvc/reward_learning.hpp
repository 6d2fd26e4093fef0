#pragma once

#include "rvc/canonical.hpp"
#include "rvc/mdp.hpp"
#include "rvc/preference.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rvc {

inline constexpr double kDefaultGradientTol = 1e-10;
inline constexpr double kDefaultL2 = 1e-6;
inline constexpr std::size_t kDefaultIterationCap = 1'000'000;

/**
 * Weighted logistic cross-entropy over linear logits x_k = feature_k . r.
 * Each term contributes weight * (p * softplus(-x) + q * softplus(x)) with
 * target probabilities p + q = 1. The asymptotic and empirical losses both
 * reduce to this form; an optional l2 * ||r||^2 penalty is added.
 */
class LogisticObjective {
public:
    struct Term {
        Vector feature;
        double weight;
        double p;
        double q;
    };

    LogisticObjective(std::size_t n_states, std::vector<Term> terms, double l2 = 0.0);

    std::size_t n_states() const { return n_states_; }
    const std::vector<Term>& terms() const { return terms_; }
    double l2() const { return l2_; }

    double loss(const Vector& r) const;
    Vector gradient(const Vector& r) const;

private:
    std::size_t n_states_;
    std::vector<Term> terms_;
    double l2_;
};

/// Counts of every visited state in h minus those in h'; the logit of the
/// partial-return model is feature . r.
Vector pair_feature(const TrajectoryPair& pair, std::size_t n_states);

/// Asymptotic loss expressed as an objective (one term per support pair).
LogisticObjective asymptotic_objective(const ComparisonDistribution& d, const Vector& r,
                                       const Vector& v);
/// Empirical loss with records grouped by feature (sign-canonicalized), in a
/// deterministic order.
LogisticObjective empirical_objective(const PreferenceDataset& data, std::size_t n_states,
                                      double l2 = 0.0);

/// Mean negative log-likelihood of the records under the partial-return model.
double empirical_loss(const Vector& r_tilde, const PreferenceDataset& data);
Vector empirical_loss_gradient(const Vector& r_tilde, const PreferenceDataset& data);

/// Exact expectation over d of the cross-entropy between bootstrapped-return
/// choices under (r, v) and partial-return choices under r_tilde.
double asymptotic_loss(const Vector& r_tilde, const ComparisonDistribution& d, const Vector& r,
                       const Vector& v);
Vector asymptotic_loss_gradient(const Vector& r_tilde, const ComparisonDistribution& d,
                                const Vector& r, const Vector& v);

struct LearnOptions {
    std::size_t gauge_state = 0;
    double tol = kDefaultGradientTol;
    std::size_t max_iterations = kDefaultIterationCap;
};

struct LearnedReward {
    RewardFunction r_hat;
    double final_loss = 0.0;
    double gradient_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// Human-readable reason when !converged.
    std::string note;
    std::string gauge;
    /// States whose offset from the gauge state is pinned by the data.
    std::vector<bool> identified;
    std::vector<std::pair<std::size_t, double>> loss_curve;
};

/**
 * Damped Newton minimization with r(gauge_state) = 0 fixed. States that the
 * data does not tie to the gauge state get their own anchor (smallest state
 * of their component, set to 0) when the objective has no penalty, and are
 * reported as unidentified.
 */
LearnedReward minimize(const LogisticObjective& objective, const LearnOptions& options = {});

/// Throws InvalidInput unless d compares transitions.
LearnedReward minimize_asymptotic(const ComparisonDistribution& d, const Vector& r,
                                  const Vector& v, const LearnOptions& options = {});

LearnedReward minimize_empirical(const PreferenceDataset& data, std::size_t n_states,
                                 double l2 = kDefaultL2, const LearnOptions& options = {});

/// Uniform over (common, move, instrumental) vs (common, stay, common) and
/// (instrumental, move, terminal) vs (instrumental, stay, instrumental).
ComparisonDistribution canonical_comparisons();

struct SampledMode {
    std::size_t n;
    std::uint64_t seed;
    double l2 = kDefaultL2;
};

struct PipelineReport {
    canonical::Params params;
    double threshold = 0.0;
    bool above_threshold = false;
    double optimal_gain = 0.0;
    Vector v_star;
    LearnedReward learned;
    ActionChoice proxy_policy;
    std::vector<ActionChoice> proxy_optimal_policies;
    double achieved_true_gain = 0.0;
    /// Achieved gain is the worst achievable one.
    bool misaligned = false;
};

/// Canonical example -> V* -> learned reward -> proxy-optimal policy -> true gain.
/// Without `sampled`, learns from the asymptotic loss.
PipelineReport misalignment_pipeline(const canonical::Params& params, const ComparisonDistribution& d,
                                     const std::optional<SampledMode>& sampled = std::nullopt,
                                     const LearnOptions& options = {});

} // namespace rvc
