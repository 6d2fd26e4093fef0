#include "rvc/preference.hpp"

#include "rvc/errors.hpp"

#include <cmath>
#include <random>
#include <string>

namespace rvc {

void Trajectory::validate(std::size_t n_states, std::size_t n_actions) const {
    if (states.size() != actions.size() + 1)
        throw InvalidInput("trajectory needs exactly one more state than actions");
    if (n_states > 0)
        for (auto s : states)
            if (s >= n_states)
                throw InvalidInput("trajectory state out of range");
    if (n_actions > 0)
        for (auto a : actions)
            if (a >= n_actions)
                throw InvalidInput("trajectory action out of range");
}

Trajectory transition(std::size_t s0, std::size_t a0, std::size_t s1) {
    return Trajectory{{s0, s1}, {a0}};
}

ComparisonDistribution::ComparisonDistribution(std::vector<WeightedPair> support)
    : support_(std::move(support)) {
    if (support_.empty())
        throw InvalidInput("comparison distribution has empty support");
    double total = 0.0;
    for (const auto& wp : support_) {
        wp.pair.h.validate();
        wp.pair.h_prime.validate();
        if (!(wp.probability > 0.0))
            throw InvalidInput("comparison probabilities must be positive");
        total += wp.probability;
    }
    if (std::abs(total - 1.0) > kStochasticTol)
        throw InvalidInput("comparison probabilities sum to " + std::to_string(total));
}

std::size_t ComparisonDistribution::state_bound() const {
    std::size_t bound = 0;
    for (const auto& wp : support_) {
        for (auto s : wp.pair.h.states)
            bound = std::max(bound, s + 1);
        for (auto s : wp.pair.h_prime.states)
            bound = std::max(bound, s + 1);
    }
    return bound;
}

double logistic(double x) {
    // Only the negative branch is computed directly; the other is its
    // complement, which makes logistic(x) + logistic(-x) round to exactly 1.
    if (x < 0.0) {
        const double e = std::exp(x);
        return e / (1.0 + e);
    }
    const double e = std::exp(-x);
    return 1.0 - e / (1.0 + e);
}

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double partial_return(const Trajectory& h, const Vector& r) {
    double total = 0.0;
    for (std::size_t t = 0; t < h.length(); ++t)
        total += r(Eigen::Index(h.states[t]));
    return total;
}

double segment_return(const Trajectory& h, const Vector& r) {
    return partial_return(h, r) + r(Eigen::Index(h.last()));
}

double bootstrapped_return(const Trajectory& h, const Vector& r, const Vector& v) {
    return partial_return(h, r) + v(Eigen::Index(h.last()));
}

double bootstrapped_logit(const TrajectoryPair& pair, const Vector& r, const Vector& v) {
    return bootstrapped_return(pair.h, r, v) - bootstrapped_return(pair.h_prime, r, v);
}

double choice_prob_bootstrapped(const TrajectoryPair& pair, const Vector& r, const Vector& v) {
    return logistic(bootstrapped_logit(pair, r, v));
}

double choice_prob_partial(const TrajectoryPair& pair, const Vector& r_tilde) {
    return logistic(segment_return(pair.h, r_tilde) - segment_return(pair.h_prime, r_tilde));
}

bool compares_transitions(const ComparisonDistribution& d) {
    for (const auto& wp : d.support()) {
        const auto& h = wp.pair.h;
        const auto& hp = wp.pair.h_prime;
        if (h.length() != 1 || hp.length() != 1 || h.first() != hp.first())
            return false;
    }
    return true;
}

ComparisonGraph::ComparisonGraph(const ComparisonDistribution& d, std::size_t n_states)
    : adjacency_(n_states, std::vector<bool>(n_states, false)), component_(n_states, 0) {
    if (!compares_transitions(d))
        throw InvalidInput("comparison graph needs a distribution that compares transitions");
    if (d.state_bound() > n_states)
        throw InvalidInput("comparison distribution mentions states beyond n_states");
    for (const auto& wp : d.support()) {
        const auto a = wp.pair.h.last();
        const auto b = wp.pair.h_prime.last();
        adjacency_[a][b] = adjacency_[b][a] = true;
    }
    std::vector<bool> seen(n_states, false);
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < n_states; ++s) {
        if (seen[s])
            continue;
        seen[s] = true;
        stack.assign(1, s);
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            component_[u] = n_components_;
            for (std::size_t w = 0; w < n_states; ++w) {
                if (adjacency_[u][w] && !seen[w]) {
                    seen[w] = true;
                    stack.push_back(w);
                }
            }
        }
        ++n_components_;
    }
}

bool ComparisonGraph::adjoins(std::size_t s, std::size_t t) const { return adjacency_.at(s).at(t); }

bool ComparisonGraph::connects(std::size_t s, std::size_t t) const {
    return component_.at(s) == component_.at(t);
}

bool ComparisonGraph::connects_all() const { return n_components_ <= 1; }

ComparisonGraph comparison_graph(const ComparisonDistribution& d, std::size_t n_states) {
    return ComparisonGraph(d, n_states);
}

bool connects(const ComparisonDistribution& d, std::size_t n_states, std::size_t s, std::size_t t) {
    return ComparisonGraph(d, n_states).connects(s, t);
}

PreferenceDataset sample_dataset(const ComparisonDistribution& d, const Vector& r, const Vector& v,
                                 std::size_t n, std::uint64_t seed) {
    if (n == 0)
        throw InvalidInput("dataset size must be positive");
    if (d.state_bound() > std::size_t(r.size()) || r.size() != v.size())
        throw InvalidInput("reward/value length does not cover the comparison distribution");

    const auto& support = d.support();
    std::vector<double> cumulative(support.size());
    std::vector<double> prob_h(support.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
        acc += support[i].probability;
        cumulative[i] = acc;
        prob_h[i] = choice_prob_bootstrapped(support[i].pair, r, v);
    }

    std::mt19937_64 rng(seed);
    const auto uniform = [&rng] { return double(rng() >> 11) * 0x1.0p-53; };

    PreferenceDataset out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = uniform() * acc;
        std::size_t k = 0;
        while (k + 1 < cumulative.size() && u >= cumulative[k])
            ++k;
        const int y = uniform() < prob_h[k] ? 1 : 0;
        out.push_back({support[k].pair.h, support[k].pair.h_prime, y});
    }
    return out;
}

} // namespace rvc
