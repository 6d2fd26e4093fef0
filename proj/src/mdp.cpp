#include "rvc/mdp.hpp"

#include "rvc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rvc {

namespace {

void check_stochastic_rows(const Matrix& m, const std::string& what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double p = m(i, j);
            if (!std::isfinite(p) || p < 0.0 || p > 1.0)
                throw InvalidInput(what + ": entry outside [0, 1] in row " + std::to_string(i));
            sum += p;
        }
        if (std::abs(sum - 1.0) > kStochasticTol)
            throw InvalidInput(what + ": row " + std::to_string(i) + " sums to " +
                               std::to_string(sum));
    }
}

// reach(i, j) is true when j can be reached from i in zero or more steps.
std::vector<std::vector<bool>> reachability(const Matrix& chain) {
    const auto n = static_cast<std::size_t>(chain.rows());
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < n; ++s) {
        reach[s][s] = true;
        stack.assign(1, s);
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            for (std::size_t v = 0; v < n; ++v) {
                if (chain(Eigen::Index(u), Eigen::Index(v)) > 0.0 && !reach[s][v]) {
                    reach[s][v] = true;
                    stack.push_back(v);
                }
            }
        }
    }
    return reach;
}

} // namespace

Mdp::Mdp(std::vector<Matrix> transitions, std::size_t initial_state)
    : transitions_(std::move(transitions)), initial_state_(initial_state) {
    if (transitions_.empty())
        throw InvalidInput("mdp needs at least one action");
    const auto n = transitions_.front().rows();
    if (n == 0)
        throw InvalidInput("mdp needs at least one state");
    for (std::size_t a = 0; a < transitions_.size(); ++a) {
        const auto& p = transitions_[a];
        if (p.rows() != n || p.cols() != n)
            throw InvalidInput("transition matrix of action " + std::to_string(a) +
                               " is not " + std::to_string(n) + "x" + std::to_string(n));
        check_stochastic_rows(p, "transition matrix of action " + std::to_string(a));
    }
    if (initial_state_ >= static_cast<std::size_t>(n))
        throw InvalidInput("initial state out of range");
}

RewardFunction::RewardFunction(Vector values) : values_(std::move(values)) {
    if (values_.size() == 0)
        throw InvalidInput("reward function is empty");
    if (!values_.allFinite())
        throw InvalidInput("reward function has non-finite entries");
}

RewardFunction::RewardFunction(std::initializer_list<double> values)
    : RewardFunction(Vector::Map(values.begin(), Eigen::Index(values.size()))) {}

Policy::Policy(Matrix probs) : probs_(std::move(probs)) {
    if (probs_.rows() == 0 || probs_.cols() == 0)
        throw InvalidInput("policy is empty");
    check_stochastic_rows(probs_, "policy");
}

Policy Policy::deterministic(std::span<const std::size_t> actions, std::size_t n_actions) {
    Matrix probs = Matrix::Zero(Eigen::Index(actions.size()), Eigen::Index(n_actions));
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] >= n_actions)
            throw InvalidInput("action index out of range in state " + std::to_string(s));
        probs(Eigen::Index(s), Eigen::Index(actions[s])) = 1.0;
    }
    return Policy(std::move(probs));
}

bool Policy::is_deterministic() const {
    for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
        if (std::count(probs_.row(s).begin(), probs_.row(s).end(), 1.0) != 1)
            return false;
    }
    return true;
}

std::vector<std::size_t> Policy::actions() const {
    if (!is_deterministic())
        throw InvalidInput("policy is not deterministic");
    std::vector<std::size_t> out(n_states());
    for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
        Eigen::Index a;
        probs_.row(s).maxCoeff(&a);
        out[std::size_t(s)] = std::size_t(a);
    }
    return out;
}

Matrix induced_chain(const Mdp& mdp, const Policy& policy) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw InvalidInput("policy dimensions do not match the mdp");
    const auto n = Eigen::Index(mdp.n_states());
    Matrix chain = Matrix::Zero(n, n);
    for (std::size_t a = 0; a < mdp.n_actions(); ++a)
        chain += policy.probs().col(Eigen::Index(a)).asDiagonal() * mdp.transition(a);
    return chain;
}

std::vector<StateSet> recurrent_classes(const Matrix& chain) {
    const auto n = static_cast<std::size_t>(chain.rows());
    const auto reach = reachability(chain);
    std::vector<bool> assigned(n, false);
    std::vector<StateSet> classes;
    for (std::size_t s = 0; s < n; ++s) {
        if (assigned[s])
            continue;
        StateSet cls;
        for (std::size_t t = 0; t < n; ++t)
            if (reach[s][t] && reach[t][s])
                cls.push_back(t);
        for (auto t : cls)
            assigned[t] = true;
        // Closed iff nothing outside the class is reachable from it.
        bool closed = true;
        for (std::size_t t = 0; t < n && closed; ++t)
            if (reach[s][t] && !reach[t][s])
                closed = false;
        if (closed)
            classes.push_back(std::move(cls));
    }
    return classes;
}

Vector class_invariant_distribution(const Matrix& chain, std::span<const std::size_t> cls) {
    const auto k = Eigen::Index(cls.size());
    Matrix sub(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
            sub(i, j) = chain(Eigen::Index(cls[std::size_t(i)]), Eigen::Index(cls[std::size_t(j)]));
    // phi^T (I - P) = 0 with the last equation replaced by sum(phi) = 1.
    Matrix a = (Matrix::Identity(k, k) - sub).transpose();
    a.row(k - 1).setOnes();
    Vector b = Vector::Zero(k);
    b(k - 1) = 1.0;
    const Vector local = a.fullPivLu().solve(b);
    Vector phi = Vector::Zero(chain.rows());
    for (Eigen::Index i = 0; i < k; ++i)
        phi(Eigen::Index(cls[std::size_t(i)])) = std::max(local(i), 0.0);
    return phi / phi.sum();
}

ChainAnalysis analyze_chain(const Matrix& chain, std::size_t start) {
    const auto n = static_cast<std::size_t>(chain.rows());
    if (start >= n)
        throw InvalidInput("start state out of range");

    ChainAnalysis out;
    out.transition_matrix = chain;
    out.recurrent_classes = recurrent_classes(chain);
    out.is_unichain = out.recurrent_classes.size() == 1;

    const auto reach = reachability(chain);
    std::vector<int> class_of(n, -1);
    for (std::size_t c = 0; c < out.recurrent_classes.size(); ++c) {
        for (auto s : out.recurrent_classes[c])
            class_of[s] = int(c);
        if (reach[start][out.recurrent_classes[c].front()])
            out.reachable_classes.push_back(c);
    }
    out.is_unichain_from_start = out.reachable_classes.size() == 1;

    std::vector<Vector> invariant;
    invariant.reserve(out.recurrent_classes.size());
    for (const auto& cls : out.recurrent_classes)
        invariant.push_back(class_invariant_distribution(chain, cls));

    if (class_of[start] >= 0) {
        out.occupancy = invariant[std::size_t(class_of[start])];
        return out;
    }
    if (out.is_unichain_from_start) {
        out.occupancy = invariant[out.reachable_classes.front()];
        return out;
    }

    // Absorption probabilities from the transient states: (I - Q) X = R.
    StateSet transient;
    std::vector<Eigen::Index> local(n, -1);
    for (std::size_t s = 0; s < n; ++s) {
        if (class_of[s] < 0) {
            local[s] = Eigen::Index(transient.size());
            transient.push_back(s);
        }
    }
    const auto t = Eigen::Index(transient.size());
    const auto nc = Eigen::Index(out.recurrent_classes.size());
    Matrix q(t, t);
    Matrix rhs = Matrix::Zero(t, nc);
    for (Eigen::Index i = 0; i < t; ++i) {
        const auto si = Eigen::Index(transient[std::size_t(i)]);
        for (Eigen::Index j = 0; j < t; ++j)
            q(i, j) = chain(si, Eigen::Index(transient[std::size_t(j)]));
        for (std::size_t s = 0; s < n; ++s)
            if (class_of[s] >= 0)
                rhs(i, class_of[s]) += chain(si, Eigen::Index(s));
    }
    const Matrix absorb = (Matrix::Identity(t, t) - q).fullPivLu().solve(rhs);
    out.occupancy = Vector::Zero(Eigen::Index(n));
    for (auto c : out.reachable_classes)
        out.occupancy += std::max(absorb(local[start], Eigen::Index(c)), 0.0) * invariant[c];
    out.occupancy /= out.occupancy.sum();
    return out;
}

ChainAnalysis analyze_chain(const Mdp& mdp, const Policy& policy) {
    return analyze_chain(induced_chain(mdp, policy), mdp.initial_state());
}

Vector occupancy_from_start(const Mdp& mdp, const Policy& policy) {
    return analyze_chain(mdp, policy).occupancy;
}

double average_reward(const Mdp& mdp, const RewardFunction& r, const Policy& policy) {
    if (r.size() != mdp.n_states())
        throw InvalidInput("reward length does not match the number of states");
    return r.values().dot(occupancy_from_start(mdp, policy));
}

Vector relative_value(const Matrix& chain, const Vector& r, double* gain, Vector* occupancy) {
    if (r.size() != chain.rows())
        throw InvalidInput("reward length does not match the chain");
    const auto classes = recurrent_classes(chain);
    if (classes.size() != 1)
        throw UnsupportedStructure("relative value needs a single recurrent class, chain has " +
                                   std::to_string(classes.size()));
    const Vector phi = class_invariant_distribution(chain, classes.front());
    const double g = r.dot(phi);
    const auto n = chain.rows();

    // Rank-corrected Poisson system (I - P + 1 phi^T) V = r - g 1.
    const Matrix a = Matrix::Identity(n, n) - chain + Vector::Ones(n) * phi.transpose();
    const auto lu = a.fullPivLu();
    const Vector rhs = r - g * Vector::Ones(n);
    Vector v = lu.solve(rhs);
    v += lu.solve(rhs - a * v);

    if (gain)
        *gain = g;
    if (occupancy)
        *occupancy = phi;
    return v;
}

Vector relative_value(const Mdp& mdp, const RewardFunction& r, const Policy& policy) {
    if (r.size() != mdp.n_states())
        throw InvalidInput("reward length does not match the number of states");
    return relative_value(induced_chain(mdp, policy), r.values());
}

double poisson_residual(const Matrix& chain, const Vector& r, double gain, const Vector& v) {
    return (v - r + gain * Vector::Ones(v.size()) - chain * v).lpNorm<Eigen::Infinity>();
}

} // namespace rvc
