#include "rvc/reward_learning.hpp"

#include "rvc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

namespace rvc {

namespace {

// Beyond this margin a pure (p or q = 0) term has loss below ~2e-16 and
// keeps decreasing without bound: the minimizer is not attained.
constexpr double kSeparableMargin = 36.0;
constexpr double kArmijo = 0.25;
constexpr double kPureNewtonDecrement = 1e-12;
constexpr double kRelativeStepTol = 1e-10;
constexpr double kStagnationStep = 1e-6;

// q * sigma(x) - p * sigma(-x): derivative of p*softplus(-x) + q*softplus(x),
// accurate even when both products are tiny.
double logit_slope(double x, double p, double q) { return q * logistic(x) - p * logistic(-x); }

double logit_curvature(double x) { return logistic(x) * logistic(-x); }

std::vector<double> logits(const LogisticObjective& objective, const Vector& r) {
    std::vector<double> x;
    x.reserve(objective.terms().size());
    for (const auto& t : objective.terms())
        x.push_back(t.feature.dot(r));
    return x;
}

// Union of states that appear together (nonzero) in some feature.
std::vector<std::size_t> feature_components(const LogisticObjective& objective) {
    const std::size_t n = objective.n_states();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&parent](std::size_t s) {
        while (parent[s] != s)
            s = parent[s] = parent[parent[s]];
        return s;
    };
    for (const auto& t : objective.terms()) {
        if (t.weight <= 0.0)
            continue;
        std::optional<std::size_t> first;
        for (std::size_t s = 0; s < n; ++s) {
            if (t.feature(Eigen::Index(s)) == 0.0)
                continue;
            if (!first)
                first = s;
            else
                parent[find(s)] = find(*first);
        }
    }
    std::vector<std::size_t> root(n);
    for (std::size_t s = 0; s < n; ++s)
        root[s] = find(s);
    return root;
}

} // namespace

LogisticObjective::LogisticObjective(std::size_t n_states, std::vector<Term> terms, double l2)
    : n_states_(n_states), terms_(std::move(terms)), l2_(l2) {
    if (n_states_ == 0)
        throw InvalidInput("objective needs at least one state");
    if (!(l2_ >= 0.0))
        throw InvalidInput("l2 penalty must be nonnegative");
    for (const auto& t : terms_) {
        if (std::size_t(t.feature.size()) != n_states_)
            throw InvalidInput("feature length does not match n_states");
        if (!(t.weight >= 0.0) || !(t.p >= 0.0 && t.q >= 0.0))
            throw InvalidInput("objective weights and targets must be nonnegative");
    }
}

double LogisticObjective::loss(const Vector& r) const {
    double total = 0.0;
    for (const auto& t : terms_) {
        const double x = t.feature.dot(r);
        total += t.weight * (t.p * softplus(-x) + t.q * softplus(x));
    }
    return total + l2_ * r.squaredNorm();
}

Vector LogisticObjective::gradient(const Vector& r) const {
    Vector g = 2.0 * l2_ * r;
    for (const auto& t : terms_)
        g += t.weight * logit_slope(t.feature.dot(r), t.p, t.q) * t.feature;
    return g;
}

Vector pair_feature(const TrajectoryPair& pair, std::size_t n_states) {
    pair.h.validate(n_states);
    pair.h_prime.validate(n_states);
    Vector f = Vector::Zero(Eigen::Index(n_states));
    for (auto s : pair.h.states)
        f(Eigen::Index(s)) += 1.0;
    for (auto s : pair.h_prime.states)
        f(Eigen::Index(s)) -= 1.0;
    return f;
}

LogisticObjective asymptotic_objective(const ComparisonDistribution& d, const Vector& r,
                                       const Vector& v) {
    if (r.size() != v.size())
        throw InvalidInput("reward and value lengths differ");
    const auto n = std::size_t(r.size());
    std::vector<LogisticObjective::Term> terms;
    for (const auto& wp : d.support()) {
        const double z = bootstrapped_logit(wp.pair, r, v);
        terms.push_back({pair_feature(wp.pair, n), wp.probability, logistic(z), logistic(-z)});
    }
    return LogisticObjective(n, std::move(terms));
}

LogisticObjective empirical_objective(const PreferenceDataset& data, std::size_t n_states, double l2) {
    if (data.empty())
        throw InvalidInput("empirical loss needs a nonempty dataset");
    struct Tally {
        std::size_t chosen = 0;
        std::size_t total = 0;
    };
    std::map<std::vector<long>, Tally> groups;
    for (const auto& rec : data) {
        const Vector f = pair_feature({rec.h, rec.h_prime}, n_states);
        std::vector<long> key(n_states);
        for (std::size_t s = 0; s < n_states; ++s)
            key[s] = std::lround(f(Eigen::Index(s)));
        int y = rec.y;
        const auto lead = std::find_if(key.begin(), key.end(), [](long c) { return c != 0; });
        if (lead != key.end() && *lead < 0) {
            for (auto& c : key)
                c = -c;
            y = 1 - y;
        }
        auto& tally = groups[key];
        tally.chosen += std::size_t(y);
        ++tally.total;
    }
    std::vector<LogisticObjective::Term> terms;
    const double n = double(data.size());
    for (const auto& [key, tally] : groups) {
        Vector f(static_cast<Eigen::Index>(n_states));
        for (std::size_t s = 0; s < n_states; ++s)
            f(Eigen::Index(s)) = double(key[s]);
        const double total = double(tally.total);
        terms.push_back({f, total / n, double(tally.chosen) / total,
                         double(tally.total - tally.chosen) / total});
    }
    return LogisticObjective(n_states, std::move(terms), l2);
}

double empirical_loss(const Vector& r_tilde, const PreferenceDataset& data) {
    if (data.empty())
        throw InvalidInput("empirical loss needs a nonempty dataset");
    double total = 0.0;
    for (const auto& rec : data) {
        const double x = segment_return(rec.h, r_tilde) - segment_return(rec.h_prime, r_tilde);
        total += rec.y == 1 ? softplus(-x) : softplus(x);
    }
    return total / double(data.size());
}

Vector empirical_loss_gradient(const Vector& r_tilde, const PreferenceDataset& data) {
    if (data.empty())
        throw InvalidInput("empirical loss needs a nonempty dataset");
    const auto n = std::size_t(r_tilde.size());
    Vector g = Vector::Zero(r_tilde.size());
    for (const auto& rec : data) {
        const TrajectoryPair pair{rec.h, rec.h_prime};
        const double x = segment_return(rec.h, r_tilde) - segment_return(rec.h_prime, r_tilde);
        g += (logistic(x) - double(rec.y)) * pair_feature(pair, n);
    }
    return g / double(data.size());
}

double asymptotic_loss(const Vector& r_tilde, const ComparisonDistribution& d, const Vector& r,
                       const Vector& v) {
    return asymptotic_objective(d, r, v).loss(r_tilde);
}

Vector asymptotic_loss_gradient(const Vector& r_tilde, const ComparisonDistribution& d,
                                const Vector& r, const Vector& v) {
    return asymptotic_objective(d, r, v).gradient(r_tilde);
}

LearnedReward minimize(const LogisticObjective& objective, const LearnOptions& options) {
    const std::size_t n = objective.n_states();
    if (options.gauge_state >= n)
        throw InvalidInput("gauge state out of range");
    if (!(options.tol > 0.0))
        throw InvalidInput("gradient tolerance must be positive");

    const auto comp = feature_components(objective);
    std::vector<bool> fixed(n, false);
    fixed[options.gauge_state] = true;
    std::ostringstream gauge;
    gauge << "r_hat(" << options.gauge_state << ") = 0";

    LearnedReward out;
    out.identified.assign(n, false);
    for (std::size_t s = 0; s < n; ++s)
        out.identified[s] = comp[s] == comp[options.gauge_state];
    if (objective.l2() == 0.0) {
        std::vector<bool> anchored(n, false);
        anchored[comp[options.gauge_state]] = true;
        for (std::size_t s = 0; s < n; ++s) {
            if (anchored[comp[s]])
                continue;
            anchored[comp[s]] = true;
            fixed[s] = true;
            gauge << ", r_hat(" << s << ") = 0 (unidentified component)";
        }
    }
    out.gauge = gauge.str();

    std::vector<Eigen::Index> free;
    for (std::size_t s = 0; s < n; ++s)
        if (!fixed[s])
            free.push_back(Eigen::Index(s));
    const auto nf = Eigen::Index(free.size());
    const auto& terms = objective.terms();
    const bool penalized = objective.l2() > 0.0;

    Vector r = Vector::Zero(Eigen::Index(n));
    double prev_step = std::numeric_limits<double>::infinity();
    double loss = objective.loss(r);
    std::size_t it = 0;
    for (;; ++it) {
        const auto x = logits(objective, r);
        const Vector g = objective.gradient(r);
        Vector g_free(nf);
        for (Eigen::Index i = 0; i < nf; ++i)
            g_free(i) = g(free[std::size_t(i)]);
        out.loss_curve.emplace_back(it, loss);
        const double gnorm = nf == 0 ? 0.0 : g_free.lpNorm<Eigen::Infinity>();
        out.gradient_norm = gnorm;

        if (!penalized && std::any_of(terms.begin(), terms.end(), [&](const auto& t) {
                const double xk = x[std::size_t(&t - terms.data())];
                return t.weight > 0.0 && ((t.q == 0.0 && xk > kSeparableMargin) ||
                                          (t.p == 0.0 && xk < -kSeparableMargin));
            })) {
            out.note = "loss infimum not attained (separable data)";
            break;
        }
        if (nf == 0) {
            out.converged = true;
            break;
        }
        if (it >= options.max_iterations) {
            out.note = "iteration cap reached";
            break;
        }

        // Newton direction from the square-root form of the Hessian:
        // H = J^T J and g = J^T u, so the step solves min ||J d + u||.
        const auto rows = Eigen::Index(terms.size()) + (penalized ? nf : 0);
        Matrix jac = Matrix::Zero(rows, nf);
        Vector u = Vector::Zero(rows);
        for (std::size_t k = 0; k < terms.size(); ++k) {
            const auto& t = terms[k];
            const double h = t.weight * logit_curvature(x[k]);
            if (!(h > 0.0))
                continue;
            const double root = std::sqrt(h);
            for (Eigen::Index i = 0; i < nf; ++i)
                jac(Eigen::Index(k), i) = root * t.feature(free[std::size_t(i)]);
            u(Eigen::Index(k)) = t.weight * logit_slope(x[k], t.p, t.q) / root;
        }
        if (penalized) {
            const double root = std::sqrt(2.0 * objective.l2());
            for (Eigen::Index i = 0; i < nf; ++i) {
                jac(Eigen::Index(terms.size()) + i, i) = root;
                u(Eigen::Index(terms.size()) + i) = root * r(free[std::size_t(i)]);
            }
        }
        const Vector d = -jac.completeOrthogonalDecomposition().solve(u);
        const double step = d.lpNorm<Eigen::Infinity>();
        const double step_tol = kRelativeStepTol * std::max(1.0, r.lpNorm<Eigen::Infinity>());
        if (gnorm <= options.tol &&
            (step <= step_tol || (step <= kStagnationStep && step >= prev_step))) {
            out.converged = true;
            break;
        }
        const double decrement = -g_free.dot(d);
        if (!(decrement > 0.0)) {
            out.converged = gnorm <= options.tol;
            if (!out.converged)
                out.note = "no descent direction";
            break;
        }

        double t = 1.0;
        Vector trial = r;
        double trial_loss = 0.0;
        while (true) {
            for (Eigen::Index i = 0; i < nf; ++i)
                trial(free[std::size_t(i)]) = r(free[std::size_t(i)]) + t * d(i);
            trial_loss = objective.loss(trial);
            if (decrement <= kPureNewtonDecrement || trial_loss <= loss - kArmijo * t * decrement)
                break;
            t *= 0.5;
            if (t < 1e-16)
                break;
        }
        if (t < 1e-16) {
            out.converged = gnorm <= options.tol;
            if (!out.converged)
                out.note = "line search failed";
            break;
        }
        r = trial;
        loss = trial_loss;
        prev_step = step;
    }
    out.iterations = it;
    out.final_loss = objective.loss(r);
    out.r_hat = RewardFunction(r);
    return out;
}

LearnedReward minimize_asymptotic(const ComparisonDistribution& d, const Vector& r, const Vector& v,
                                  const LearnOptions& options) {
    if (!compares_transitions(d))
        throw InvalidInput("asymptotic minimization needs a distribution that compares transitions");
    if (d.state_bound() > std::size_t(r.size()))
        throw InvalidInput("comparison distribution mentions states beyond the reward");
    return minimize(asymptotic_objective(d, r, v), options);
}

LearnedReward minimize_empirical(const PreferenceDataset& data, std::size_t n_states, double l2,
                                 const LearnOptions& options) {
    return minimize(empirical_objective(data, n_states, l2), options);
}

ComparisonDistribution canonical_comparisons() {
    using namespace canonical;
    return ComparisonDistribution({
        {{transition(kCommon, kMove, kInstrumental), transition(kCommon, kStay, kCommon)}, 0.5},
        {{transition(kInstrumental, kMove, kTerminal), transition(kInstrumental, kStay, kInstrumental)},
         0.5},
    });
}

PipelineReport misalignment_pipeline(const canonical::Params& params, const ComparisonDistribution& d,
                                     const std::optional<SampledMode>& sampled,
                                     const LearnOptions& options) {
    auto [mdp, r] = canonical::build(params);
    const ComparisonGraph graph(d, mdp.n_states());
    if (!graph.connects_all())
        throw InvalidInput("comparison distribution must connect all states");

    PipelineReport out;
    out.params = params;
    out.threshold = canonical::learned_reward_threshold(params.epsilon);
    out.above_threshold = params.m > out.threshold;

    const auto opt = canonical::optimize(mdp, r);
    if (!opt.is_unique)
        throw NonUniqueOptimum("optimal policy of the canonical example is not unique");
    out.optimal_gain = opt.optimal_gain;
    out.v_star = *opt.optimal_value;

    if (sampled) {
        const auto data = sample_dataset(d, r.values(), out.v_star, sampled->n, sampled->seed);
        out.learned = minimize_empirical(data, mdp.n_states(), sampled->l2, options);
    } else {
        out.learned = minimize_asymptotic(d, r.values(), out.v_star, options);
    }

    const auto proxy = canonical::optimize(mdp, out.learned.r_hat);
    out.proxy_policy = proxy.optimal_actions;
    out.proxy_optimal_policies = proxy.all_optimal_policies;
    out.achieved_true_gain = deterministic_gain(mdp, r.values(), proxy.optimal_actions);
    out.misaligned = std::abs(out.achieved_true_gain - canonical::kMisalignedGain) <= kGainTieTol;
    return out;
}

} // namespace rvc
