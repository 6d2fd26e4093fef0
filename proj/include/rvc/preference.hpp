#pragma once

#include "rvc/mdp.hpp"

#include <cstdint>
#include <vector>

namespace rvc {

/// Partial trajectory (s_0, a_0, ..., a_{T-1}, s_T).
struct Trajectory {
    std::vector<std::size_t> states;
    std::vector<std::size_t> actions;

    std::size_t length() const { return actions.size(); }
    std::size_t first() const { return states.front(); }
    std::size_t last() const { return states.back(); }

    /// Checks |states| = |actions| + 1 and, with n_states/n_actions > 0, index bounds.
    void validate(std::size_t n_states = 0, std::size_t n_actions = 0) const;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// One-transition trajectory (s0, a0, s1).
Trajectory transition(std::size_t s0, std::size_t a0, std::size_t s1);

struct TrajectoryPair {
    Trajectory h;
    Trajectory h_prime;

    friend bool operator==(const TrajectoryPair&, const TrajectoryPair&) = default;
};

struct WeightedPair {
    TrajectoryPair pair;
    double probability;
};

/// Finite-support distribution over trajectory pairs.
class ComparisonDistribution {
public:
    explicit ComparisonDistribution(std::vector<WeightedPair> support);

    const std::vector<WeightedPair>& support() const { return support_; }
    /// Largest state index mentioned, plus one.
    std::size_t state_bound() const;

private:
    std::vector<WeightedPair> support_;
};

/// Choice record: y = 1 when h was chosen over h'.
struct PreferenceRecord {
    Trajectory h;
    Trajectory h_prime;
    int y;
};

using PreferenceDataset = std::vector<PreferenceRecord>;

/// Standard logistic, evaluated so that logistic(x) + logistic(-x) == 1 exactly.
double logistic(double x);
/// log(1 + exp(x)) without overflow.
double softplus(double x);

/// sum_{t<T} r(s_t); the final state is excluded.
double partial_return(const Trajectory& h, const Vector& r);
/// sum_{t<=T} r(s_t): reward over every state of the segment. This is the
/// return the partial-return choice model and the learning losses compare.
double segment_return(const Trajectory& h, const Vector& r);
/// partial_return(h, r) + v(s_T)
double bootstrapped_return(const Trajectory& h, const Vector& r, const Vector& v);

/// Preference logit under the bootstrapped-return model.
double bootstrapped_logit(const TrajectoryPair& pair, const Vector& r, const Vector& v);
double choice_prob_bootstrapped(const TrajectoryPair& pair, const Vector& r, const Vector& v);
/// Preference probability under the partial-return model, comparing segment returns.
double choice_prob_partial(const TrajectoryPair& pair, const Vector& r_tilde);

/// Every supported pair starts from a common state and has one transition each.
bool compares_transitions(const ComparisonDistribution& d);

/// Undirected graph on states with an edge between the successor states of
/// each supported transition comparison.
class ComparisonGraph {
public:
    ComparisonGraph(const ComparisonDistribution& d, std::size_t n_states);

    std::size_t n_states() const { return adjacency_.size(); }
    bool adjoins(std::size_t s, std::size_t t) const;
    bool connects(std::size_t s, std::size_t t) const;
    bool connects_all() const;
    /// Component label per state; labels are ordered by smallest member.
    const std::vector<std::size_t>& components() const { return component_; }
    std::size_t n_components() const { return n_components_; }

private:
    std::vector<std::vector<bool>> adjacency_;
    std::vector<std::size_t> component_;
    std::size_t n_components_ = 0;
};

/// Throws InvalidInput unless d compares transitions.
ComparisonGraph comparison_graph(const ComparisonDistribution& d, std::size_t n_states);
bool connects(const ComparisonDistribution& d, std::size_t n_states, std::size_t s, std::size_t t);

/**
 * Draws n iid records: a pair by inverse CDF over d's support in listed
 * order, then y ~ Bernoulli(choice_prob_bootstrapped). Uses std::mt19937_64
 * seeded with `seed`; each record consumes two 64-bit outputs, mapped to
 * [0, 1) as (x >> 11) * 2^-53. The output depends only on (d, r, v, n, seed).
 */
PreferenceDataset sample_dataset(const ComparisonDistribution& d, const Vector& r, const Vector& v,
                                 std::size_t n, std::uint64_t seed);

} // namespace rvc
