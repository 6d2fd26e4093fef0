#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rvc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using StateSet = std::vector<std::size_t>;

/// Row sums of transition tensors and policies must be within this of one.
inline constexpr double kStochasticTol = 1e-12;
/// Max-norm bound on invariance and Poisson residuals.
inline constexpr double kInvarianceTol = 1e-9;
/// Occupancy vectors must sum to one within this.
inline constexpr double kOccupancySumTol = 1e-10;

/**
 * Finite MDP (S, A, P, s0). transitions[a](s, s') is the probability of
 * moving from s to s' under action a. The constructor validates the tensor
 * and never renormalizes it.
 */
class Mdp {
public:
    Mdp(std::vector<Matrix> transitions, std::size_t initial_state);

    std::size_t n_states() const { return static_cast<std::size_t>(transitions_.front().rows()); }
    std::size_t n_actions() const { return transitions_.size(); }
    std::size_t initial_state() const { return initial_state_; }

    const Matrix& transition(std::size_t action) const { return transitions_.at(action); }
    const std::vector<Matrix>& transitions() const { return transitions_; }

private:
    std::vector<Matrix> transitions_;
    std::size_t initial_state_;
};

/// State reward r: S -> R. Entries must be finite.
class RewardFunction {
public:
    RewardFunction() = default;
    explicit RewardFunction(Vector values);
    RewardFunction(std::initializer_list<double> values);

    std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
    double operator[](std::size_t s) const { return values_(static_cast<Eigen::Index>(s)); }
    const Vector& values() const { return values_; }

private:
    Vector values_;
};

/// Stochastic policy pi(a|s), stored as an |S| x |A| row-stochastic matrix.
class Policy {
public:
    explicit Policy(Matrix probs);

    /// Policy selecting actions[s] with probability one in state s.
    static Policy deterministic(std::span<const std::size_t> actions, std::size_t n_actions);

    std::size_t n_states() const { return static_cast<std::size_t>(probs_.rows()); }
    std::size_t n_actions() const { return static_cast<std::size_t>(probs_.cols()); }
    const Matrix& probs() const { return probs_; }

    bool is_deterministic() const;
    /// Action chosen in each state; throws InvalidInput unless deterministic.
    std::vector<std::size_t> actions() const;

private:
    Matrix probs_;
};

/// Structure of the Markov chain a policy induces, seen from the initial state.
struct ChainAnalysis {
    Matrix transition_matrix;
    /// Cesaro-average state frequencies from s0.
    Vector occupancy;
    /// Closed communicating classes of the whole chain, ordered by smallest member.
    std::vector<StateSet> recurrent_classes;
    /// Indices into recurrent_classes of the classes reachable from s0.
    std::vector<std::size_t> reachable_classes;
    bool is_unichain_from_start = false;
    /// Exactly one recurrent class in the whole chain.
    bool is_unichain = false;
};

/// P_pi(s, s') = sum_a pi(a|s) P[a](s, s').
Matrix induced_chain(const Mdp& mdp, const Policy& policy);

/// Closed communicating classes of a stochastic matrix (edges are entries > 0).
std::vector<StateSet> recurrent_classes(const Matrix& chain);

/// Invariant distribution of the chain restricted to an irreducible closed class,
/// embedded in a full-length vector that is zero off the class.
Vector class_invariant_distribution(const Matrix& chain, std::span<const std::size_t> cls);

ChainAnalysis analyze_chain(const Matrix& chain, std::size_t start);
ChainAnalysis analyze_chain(const Mdp& mdp, const Policy& policy);

Vector occupancy_from_start(const Mdp& mdp, const Policy& policy);

/// Long-run average reward r_pi from s0.
double average_reward(const Mdp& mdp, const RewardFunction& r, const Policy& policy);

/**
 * Relative value (bias) of a policy: the solution of
 *   V = r - r_pi 1 + P_pi V,  phi_pi^T V = 0.
 * Throws UnsupportedStructure unless the induced chain has a single recurrent
 * class, since otherwise the gain differs between classes and V is undefined.
 */
Vector relative_value(const Mdp& mdp, const RewardFunction& r, const Policy& policy);

/// Same as above on an explicit chain; `gain` and `occupancy` are outputs.
Vector relative_value(const Matrix& chain, const Vector& r, double* gain = nullptr,
                      Vector* occupancy = nullptr);

/// ||V - r + g 1 - P V||_inf
double poisson_residual(const Matrix& chain, const Vector& r, double gain, const Vector& v);

} // namespace rvc
