#pragma once

#include "rvc/mdp.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace rvc {

using ActionChoice = std::vector<std::size_t>;

inline constexpr double kGainTieTol = 1e-9;
inline constexpr std::size_t kDefaultEnumerationCap = 1'000'000;

struct OptimizeOptions {
    std::size_t enumeration_cap = kDefaultEnumerationCap;
    double tie_tolerance = kGainTieTol;
    /// Per-state admissible actions; empty means every action everywhere.
    std::vector<std::vector<std::size_t>> allowed_actions;
};

struct PolicyGain {
    ActionChoice actions;
    double gain;
};

struct OptimizationResult {
    ActionChoice optimal_actions;
    double optimal_gain = 0.0;
    /// Bias of the first maximizer; empty when its chain is multichain.
    std::optional<Vector> optimal_value;
    std::vector<ActionChoice> all_optimal_policies;
    bool is_unique = false;
    /// Every enumerated policy and its gain, in lexicographic order.
    std::vector<PolicyGain> evaluated;

    Policy optimal_policy(std::size_t n_actions) const {
        return Policy::deterministic(optimal_actions, n_actions);
    }
};

/// Calls `visit` for every deterministic policy in lexicographic order
/// (state 0 most significant). Throws CapacityError above `cap`.
template <typename Visit>
void for_each_deterministic_policy(const std::vector<std::vector<std::size_t>>& allowed,
                                   std::size_t cap, Visit&& visit);

std::vector<std::vector<std::size_t>> all_actions(const Mdp& mdp);

/// Number of deterministic policies, saturating at cap + 1.
std::size_t count_deterministic_policies(const std::vector<std::vector<std::size_t>>& allowed,
                                         std::size_t cap);

/// Gain of a deterministic policy without materializing a Policy matrix.
double deterministic_gain(const Mdp& mdp, const Vector& r, const ActionChoice& actions);
Matrix deterministic_chain(const Mdp& mdp, const ActionChoice& actions);

/// Exhaustive average-reward optimization over deterministic policies.
OptimizationResult optimize(const Mdp& mdp, const RewardFunction& r,
                            const OptimizeOptions& options = {});

bool assert_unique_optimal(const OptimizationResult& result);

// --- implementation -------------------------------------------------------

template <typename Visit>
void for_each_deterministic_policy(const std::vector<std::vector<std::size_t>>& allowed,
                                   std::size_t cap, Visit&& visit) {
    count_deterministic_policies(allowed, cap);
    const std::size_t n = allowed.size();
    std::vector<std::size_t> index(n, 0);
    ActionChoice actions(n);
    while (true) {
        for (std::size_t s = 0; s < n; ++s)
            actions[s] = allowed[s][index[s]];
        visit(static_cast<const ActionChoice&>(actions));
        std::size_t s = n;
        while (s > 0) {
            --s;
            if (++index[s] < allowed[s].size())
                break;
            index[s] = 0;
            if (s == 0)
                return;
        }
        if (n == 0)
            return;
    }
}

} // namespace rvc
