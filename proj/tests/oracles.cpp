#include "oracles.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace oracle {

Matrix cesaro_limit(const Matrix& p) {
    const auto n = p.rows();
    Matrix q = 0.5 * (Matrix::Identity(n, n) + p);
    // 2^80 lazy steps; entries stop moving long before that on desk-scale chains.
    for (int i = 0; i < 80; ++i) {
        Matrix next = q * q;
        // Undo drift in row sums from rounding.
        for (Eigen::Index s = 0; s < n; ++s)
            next.row(s) /= next.row(s).sum();
        q = std::move(next);
    }
    return q;
}

Vector occupancy(const Matrix& p, std::size_t start) {
    return cesaro_limit(p).row(Eigen::Index(start)).transpose();
}

Vector bias(const Matrix& p, const Vector& r) {
    const auto n = p.rows();
    const Matrix star = cesaro_limit(p);
    const Matrix fundamental = (Matrix::Identity(n, n) - p + star).fullPivLu().inverse();
    return (fundamental - star) * r;
}

Rollout rollout(const Matrix& p, const Vector& r, std::size_t start, std::size_t steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t batches = 100;
    const std::size_t per_batch = steps / batches;
    std::vector<double> means(batches, 0.0);
    auto s = Eigen::Index(start);
    for (std::size_t b = 0; b < batches; ++b) {
        double sum = 0.0;
        for (std::size_t t = 0; t < per_batch; ++t) {
            sum += r(s);
            double x = u(rng);
            Eigen::Index next = 0;
            for (; next + 1 < p.cols(); ++next) {
                x -= p(s, next);
                if (x < 0.0)
                    break;
            }
            s = next;
        }
        means[b] = sum / double(per_batch);
    }
    const double mean = std::accumulate(means.begin(), means.end(), 0.0) / double(batches);
    double var = 0.0;
    for (double m : means)
        var += (m - mean) * (m - mean);
    var /= double(batches - 1);
    return {mean, std::sqrt(var / double(batches))};
}

Matrix chain(const std::vector<Matrix>& transitions, const std::vector<std::size_t>& actions) {
    const auto n = transitions.front().rows();
    Matrix p(n, n);
    for (Eigen::Index s = 0; s < n; ++s)
        p.row(s) = transitions[actions[std::size_t(s)]].row(s);
    return p;
}

double best_gain(const std::vector<Matrix>& transitions, std::size_t start, const Vector& r) {
    const std::size_t n = std::size_t(transitions.front().rows());
    const std::size_t k = transitions.size();
    std::vector<std::size_t> a(n, 0);
    double best = -1e300;
    while (true) {
        best = std::max(best, occupancy(chain(transitions, a), start).dot(r));
        std::size_t s = 0;
        while (s < n && ++a[s] == k)
            a[s++] = 0;
        if (s == n)
            return best;
    }
}

Matrix Random::stochastic(std::size_t n, double sparsity) {
    Matrix p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index s = 0; s < p.rows(); ++s) {
        do {
            for (Eigen::Index t = 0; t < p.cols(); ++t)
                p(s, t) = coin(sparsity) ? 0.0 : uniform(0.05, 1.0);
        } while (p.row(s).sum() == 0.0);
        p.row(s) /= p.row(s).sum();
        // Put any rounding excess on the largest entry so rows sum to 1 tightly.
        Eigen::Index big = 0;
        p.row(s).maxCoeff(&big);
        p(s, big) += 1.0 - p.row(s).sum();
    }
    return p;
}

Vector Random::vector(std::size_t n, double lo, double hi) {
    Vector v(static_cast<Eigen::Index>(n));
    for (auto& x : v)
        x = uniform(lo, hi);
    return v;
}

rvc::Mdp Random::mdp(std::size_t n_states, std::size_t n_actions, double sparsity) {
    std::vector<Matrix> t;
    for (std::size_t a = 0; a < n_actions; ++a)
        t.push_back(stochastic(n_states, sparsity));
    return rvc::Mdp(std::move(t), index(n_states));
}

Matrix Random::policy(std::size_t n_states, std::size_t n_actions) {
    Matrix pi = Matrix::Zero(Eigen::Index(n_states), Eigen::Index(n_actions));
    for (Eigen::Index s = 0; s < pi.rows(); ++s) {
        for (Eigen::Index a = 0; a < pi.cols(); ++a)
            pi(s, a) = uniform(0.01, 1.0);
        pi.row(s) /= pi.row(s).sum();
        pi(s, 0) += 1.0 - pi.row(s).sum();
    }
    return pi;
}

namespace {

// A transition out of s0 landing on `target`, or false if none exists.
bool find_transition(const rvc::Mdp& mdp, std::size_t s0, std::size_t target, Random& rng, std::size_t& action) {
    std::vector<std::size_t> options;
    for (std::size_t a = 0; a < mdp.n_actions(); ++a)
        if (mdp.transition(a)(Eigen::Index(s0), Eigen::Index(target)) > 0.0)
            options.push_back(a);
    if (options.empty())
        return false;
    action = options[rng.index(options.size())];
    return true;
}

bool realize(const rvc::Mdp& mdp, std::size_t u, std::size_t v, Random& rng, rvc::TrajectoryPair& out) {
    const std::size_t n = mdp.n_states();
    const std::size_t offset = rng.index(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s0 = (offset + i) % n;
        std::size_t a = 0, b = 0;
        if (find_transition(mdp, s0, u, rng, a) && find_transition(mdp, s0, v, rng, b)) {
            out = {rvc::transition(s0, a, u), rvc::transition(s0, b, v)};
            return true;
        }
    }
    return false;
}

} // namespace

std::vector<rvc::WeightedPair> connecting_comparisons(const rvc::Mdp& mdp, Random& rng, std::size_t extra) {
    const std::size_t n = mdp.n_states();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());

    std::vector<rvc::TrajectoryPair> pairs;
    for (std::size_t k = 1; k < n; ++k) {
        rvc::TrajectoryPair pair;
        if (!realize(mdp, order[k], order[rng.index(k)], rng, pair))
            return {};
        pairs.push_back(pair);
    }
    for (std::size_t e = 0; e < extra; ++e) {
        rvc::TrajectoryPair pair;
        if (realize(mdp, rng.index(n), rng.index(n), rng, pair))
            pairs.push_back(pair);
    }
    if (pairs.empty())  // single-state MDP
        pairs.push_back({rvc::transition(0, 0, 0), rvc::transition(0, 0, 0)});

    std::vector<double> w(pairs.size());
    for (auto& x : w)
        x = rng.uniform(0.1, 1.0);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    std::vector<rvc::WeightedPair> out;
    double used = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double p = i + 1 == pairs.size() ? 1.0 - used : w[i] / total;
        used += p;
        out.push_back({pairs[i], p});
    }
    return out;
}

} // namespace oracle
