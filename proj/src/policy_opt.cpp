#include "rvc/policy_opt.hpp"

#include "rvc/errors.hpp"

#include <string>

namespace rvc {

std::vector<std::vector<std::size_t>> all_actions(const Mdp& mdp) {
    std::vector<std::size_t> every(mdp.n_actions());
    for (std::size_t a = 0; a < every.size(); ++a)
        every[a] = a;
    return std::vector<std::vector<std::size_t>>(mdp.n_states(), every);
}

std::size_t count_deterministic_policies(const std::vector<std::vector<std::size_t>>& allowed,
                                         std::size_t cap) {
    std::size_t count = 1;
    for (const auto& choices : allowed) {
        if (choices.empty())
            throw InvalidInput("a state has no admissible action");
        if (count > cap / choices.size()) {
            count = cap + 1;
            break;
        }
        count *= choices.size();
    }
    if (count > cap)
        throw CapacityError("policy enumeration exceeds the cap of " + std::to_string(cap));
    return count;
}

Matrix deterministic_chain(const Mdp& mdp, const ActionChoice& actions) {
    const auto n = Eigen::Index(mdp.n_states());
    Matrix chain(n, n);
    for (Eigen::Index s = 0; s < n; ++s)
        chain.row(s) = mdp.transition(actions[std::size_t(s)]).row(s);
    return chain;
}

double deterministic_gain(const Mdp& mdp, const Vector& r, const ActionChoice& actions) {
    return r.dot(analyze_chain(deterministic_chain(mdp, actions), mdp.initial_state()).occupancy);
}

OptimizationResult optimize(const Mdp& mdp, const RewardFunction& r, const OptimizeOptions& options) {
    if (r.size() != mdp.n_states())
        throw InvalidInput("reward length does not match the number of states");
    auto allowed = options.allowed_actions.empty() ? all_actions(mdp) : options.allowed_actions;
    if (allowed.size() != mdp.n_states())
        throw InvalidInput("allowed_actions must list every state");
    for (const auto& choices : allowed)
        for (auto a : choices)
            if (a >= mdp.n_actions())
                throw InvalidInput("allowed action out of range");

    OptimizationResult out;
    for_each_deterministic_policy(allowed, options.enumeration_cap, [&](const ActionChoice& actions) {
        out.evaluated.push_back({actions, deterministic_gain(mdp, r.values(), actions)});
    });

    double best = out.evaluated.front().gain;
    for (const auto& pg : out.evaluated)
        best = std::max(best, pg.gain);
    for (const auto& pg : out.evaluated)
        if (pg.gain >= best - options.tie_tolerance)
            out.all_optimal_policies.push_back(pg.actions);

    out.optimal_actions = out.all_optimal_policies.front();
    out.optimal_gain = best;
    out.is_unique = out.all_optimal_policies.size() == 1;
    try {
        out.optimal_value = relative_value(deterministic_chain(mdp, out.optimal_actions), r.values());
    } catch (const UnsupportedStructure&) {
        out.optimal_value.reset();
    }
    return out;
}

bool assert_unique_optimal(const OptimizationResult& result) { return result.is_unique; }

} // namespace rvc
