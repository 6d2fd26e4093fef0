#pragma once

#include "rvc/mdp.hpp"
#include "rvc/policy_opt.hpp"

#include <utility>

namespace rvc::canonical {

// States (0-based): common, instrumental goal, terminal goal.
inline constexpr std::size_t kCommon = 0;
inline constexpr std::size_t kInstrumental = 1;
inline constexpr std::size_t kTerminal = 2;

inline constexpr std::size_t kMove = 0;
inline constexpr std::size_t kStay = 1;

/// Terminal reward M and escape probability epsilon from the common state.
struct Params {
    double m = 20.0;
    double epsilon = 1.0 / 15.0;
};

void validate(const Params& params);

/**
 * Three-state example with rewards [0, -1, M], s0 = common state.
 * move: common -> instrumental w.p. epsilon (else stays), instrumental -> terminal,
 * terminal -> common. stay: common and instrumental self-loop, terminal -> common.
 */
std::pair<Mdp, RewardFunction> build(const Params& params);

/// Optimization with the terminal state's action pinned to move; both of its
/// actions lead back to the common state, so leaving it free only adds ties.
OptimizationResult optimize(const Mdp& mdp, const RewardFunction& r);

/// Deterministic policy from the actions at the common and instrumental states.
ActionChoice policy(std::size_t common_action, std::size_t instrumental_action);

/// epsilon (M - 1) / (1 + 2 epsilon)
double closed_form_gain(const Params& params);

/// Stationary distribution of the move-move policy.
Vector aligned_occupancy(const Params& params);

struct ValueGaps {
    double gap31;  ///< V*(terminal) - V*(common) = M - r*
    double gap23;  ///< V*(instrumental) - V*(terminal) = -1 - r*
};

/// Throws NonUniqueOptimum when the move-move policy is not optimal (M < 1).
ValueGaps closed_form_value_gaps(const Params& params);

/// Both strict inequalities under which proxy optimization lands on the
/// instrumental goal for good.
bool misalignment_condition(const Vector& r_hat, double epsilon);

struct Regime {
    double epsilon_bound;  ///< epsilon must be strictly below this
    double m_bound;        ///< M must be strictly above this
};

/// Sufficient regime for proxies conflating with degree at least beta_star.
Regime theorem1_regime(double beta_star);

/// (1 + eps + eps^2) / (1 - eps^2): above this M, a learned reward equal to
/// V* up to a constant picks the misaligned policy.
double learned_reward_threshold(double epsilon);

/// Worst achievable true average reward.
inline constexpr double kMisalignedGain = -1.0;

} // namespace rvc::canonical
