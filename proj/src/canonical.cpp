#include "rvc/canonical.hpp"

#include "rvc/errors.hpp"

#include <cmath>
#include <string>

namespace rvc::canonical {

void validate(const Params& params) {
    if (!std::isfinite(params.m))
        throw InvalidInput("M must be finite");
    if (!(params.epsilon > 0.0 && params.epsilon < 1.0))
        throw InvalidInput("epsilon must lie in (0, 1), got " + std::to_string(params.epsilon));
}

std::pair<Mdp, RewardFunction> build(const Params& params) {
    validate(params);
    const double eps = params.epsilon;
    Matrix move(3, 3), stay(3, 3);
    move << 1.0 - eps, eps, 0.0,
            0.0, 0.0, 1.0,
            1.0, 0.0, 0.0;
    stay << 1.0, 0.0, 0.0,
            0.0, 1.0, 0.0,
            1.0, 0.0, 0.0;
    return {Mdp({move, stay}, kCommon), RewardFunction{0.0, -1.0, params.m}};
}

OptimizationResult optimize(const Mdp& mdp, const RewardFunction& r) {
    OptimizeOptions options;
    options.allowed_actions = {{kMove, kStay}, {kMove, kStay}, {kMove}};
    return rvc::optimize(mdp, r, options);
}

ActionChoice policy(std::size_t common_action, std::size_t instrumental_action) {
    return {common_action, instrumental_action, kMove};
}

double closed_form_gain(const Params& params) {
    validate(params);
    return params.epsilon * (params.m - 1.0) / (1.0 + 2.0 * params.epsilon);
}

Vector aligned_occupancy(const Params& params) {
    validate(params);
    const double z = 1.0 + 2.0 * params.epsilon;
    return Vector{{1.0 / z, params.epsilon / z, params.epsilon / z}};
}

ValueGaps closed_form_value_gaps(const Params& params) {
    const double gain = closed_form_gain(params);
    // Alternatives earn 0 (remain in the common state) and -1.
    if (gain < 0.0)
        throw NonUniqueOptimum("move-move is not optimal for M < 1");
    return {params.m - gain, -1.0 - gain};
}

bool misalignment_condition(const Vector& r_hat, double epsilon) {
    if (r_hat.size() != 3)
        throw InvalidInput("misalignment condition needs a 3-state reward");
    return r_hat(1) > r_hat(0) && r_hat(1) > (r_hat(0) + epsilon * r_hat(2)) / (1.0 + epsilon);
}

Regime theorem1_regime(double beta_star) {
    if (!(beta_star > 0.0 && beta_star <= 1.0))
        throw InvalidInput("beta_star must lie in (0, 1]");
    return {beta_star / 3.0, 9.0 / (beta_star * beta_star)};
}

double learned_reward_threshold(double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw InvalidInput("epsilon must lie in (0, 1)");
    return (1.0 + epsilon + epsilon * epsilon) / (1.0 - epsilon * epsilon);
}

} // namespace rvc::canonical
