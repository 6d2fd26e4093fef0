#include "rvc/cli.hpp"

#include "rvc/canonical.hpp"
#include "rvc/conflation.hpp"
#include "rvc/errors.hpp"
#include "rvc/io.hpp"
#include "rvc/polytope.hpp"
#include "rvc/reward_learning.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace rvc::cli {

namespace fs = std::filesystem;
using io::json;

std::vector<double> Grid::values() const {
    if (count == 1)
        return {start};
    std::vector<double> out(count);
    const double step = (stop - start) / double(count - 1);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = start + step * double(i);
    out.back() = stop;
    return out;
}

Grid parse_grid(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');)
        parts.push_back(part);
    if (parts.size() != 3)
        throw std::invalid_argument("grid '" + text + "' must be start:stop:count");
    Grid g;
    std::size_t used = 0;
    try {
        g.start = std::stod(parts[0], &used);
        if (used != parts[0].size())
            throw std::invalid_argument("");
        g.stop = std::stod(parts[1], &used);
        if (used != parts[1].size())
            throw std::invalid_argument("");
        const long long n = std::stoll(parts[2], &used);
        if (used != parts[2].size() || n < 1)
            throw std::invalid_argument("");
        g.count = std::size_t(n);
    } catch (const std::exception&) {
        throw std::invalid_argument("grid '" + text + "' must be start:stop:count with count >= 1");
    }
    if (!std::isfinite(g.start) || !std::isfinite(g.stop) || (g.count == 1 && g.start != g.stop))
        throw std::invalid_argument("grid '" + text + "': a single-point grid needs start == stop");
    return g;
}

namespace {

// Raised for config-level mistakes that CLI11 cannot see.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');) {
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || part.find_first_not_of(" \t", used) != std::string::npos)
            throw UsageError("cannot parse '" + part + "' as a number");
        out.push_back(x);
    }
    if (out.empty())
        throw UsageError("empty number list");
    return out;
}

// Turns a JSON config object into flag tokens. Scalars map to "--key value";
// arrays to a comma-joined value.
std::vector<std::string> config_tokens(const json& config, std::string& command, std::string& output_dir) {
    if (!config.is_object())
        throw UsageError("config file must hold a JSON object");
    std::vector<std::string> tokens;
    for (const auto& [key, value] : config.items()) {
        if (key == "command") {
            command = value.get<std::string>();
            continue;
        }
        if (key == "output-dir") {
            output_dir = value.get<std::string>();
            continue;
        }
        std::string text;
        if (value.is_string()) {
            text = value.get<std::string>();
        } else if (value.is_number_integer() || value.is_number_unsigned()) {
            text = value.dump();
        } else if (value.is_number()) {
            text = format_number(value.get<double>());
        } else if (value.is_array()) {
            for (const auto& item : value) {
                if (!item.is_number())
                    throw UsageError("config key '" + key + "': arrays must hold numbers");
                text += (text.empty() ? "" : ",") + format_number(item.get<double>());
            }
        } else {
            throw UsageError("config key '" + key + "' has an unsupported type");
        }
        tokens.push_back("--" + key);
        tokens.push_back(text);
    }
    return tokens;
}

// --- shared environment setup -------------------------------------------------

struct Environment {
    Mdp mdp;
    RewardFunction r;
    std::optional<canonical::Params> canonical_params;
};

Environment load_environment(const std::string& mdp_path, const canonical::Params& params) {
    if (mdp_path.empty()) {
        canonical::validate(params);
        auto [mdp, r] = canonical::build(params);
        return {std::move(mdp), std::move(r), params};
    }
    const json j = io::read_json_file(mdp_path);
    auto reward = io::reward_from_mdp_json(j);
    if (!reward)
        throw InvalidInput(mdp_path + ": an environment file needs a 'reward' field");
    return {io::mdp_from_json(j), std::move(*reward), std::nullopt};
}

OptimizationResult optimize_env(const Environment& env) {
    return env.canonical_params ? canonical::optimize(env.mdp, env.r) : optimize(env.mdp, env.r);
}

Vector optimal_value(const OptimizationResult& opt) {
    if (!opt.optimal_value)
        throw UnsupportedStructure("the optimal policy's chain has several recurrent classes; V* is undefined");
    return *opt.optimal_value;
}

json env_echo(const std::string& mdp_path, const canonical::Params& params) {
    if (!mdp_path.empty())
        return {{"mdp", mdp_path}};
    return {{"m", params.m}, {"epsilon", params.epsilon}};
}

double max_centered_deviation(const Vector& a, const Vector& b) {
    const Vector d = a - b;
    return (d.array() - d.mean()).abs().maxCoeff();
}

json fixed_tolerances() {
    return {{"gain_tie", kGainTieTol},
            {"conflation_fit", kConflationFitTol},
            {"equivalence", kEquivalenceTol},
            {"stochastic_rows", kStochasticTol},
            {"vertex_dedup", kVertexDedupTol}};
}

// --- output ----------------------------------------------------------------------

class Sink {
public:
    Sink(fs::path dir, std::ostream& out) : dir_(std::move(dir)), out_(out) {}

    void json_file(const std::string& name, const json& j) {
        prepare();
        io::write_json_file((dir_ / name).string(), j);
        files_.push_back(name);
    }

    void text_file(const std::string& name, const std::string& text) {
        prepare();
        std::ofstream f(dir_ / name, std::ios::binary);
        if (!f)
            throw Error("cannot write " + (dir_ / name).string());
        f << text;
        files_.push_back(name);
    }

    void manifest(const std::string& command, const json& config, const json& seeds, json tolerances) {
        json merged = fixed_tolerances();
        for (auto& [k, v] : tolerances.items())
            merged[k] = v;
        json_file("manifest.json", {{"schema_version", io::kSchemaVersion},
                                    {"command", command},
                                    {"config", config},
                                    {"seeds", seeds},
                                    {"tolerances", merged},
                                    {"outputs", files_}});
    }

    std::ostream& out() { return out_; }

private:
    void prepare() {
        if (!dir_.empty())
            fs::create_directories(dir_);
    }

    fs::path dir_;
    std::ostream& out_;
    std::vector<std::string> files_;
};

// --- subcommands ------------------------------------------------------------------

struct EnvOpts {
    double m = 20.0;
    double epsilon = 1.0 / 15.0;
    std::string mdp;

    canonical::Params params() const { return {m, epsilon}; }
};

void add_env(CLI::App* app, EnvOpts& e, bool allow_file) {
    app->add_option("--m", e.m, "terminal-state reward M of the canonical example")->capture_default_str();
    app->add_option("--epsilon", e.epsilon, "slip probability of the canonical example")->capture_default_str();
    if (allow_file)
        app->add_option("--mdp", e.mdp, "environment JSON (with reward) instead of the canonical example");
}

struct LearnTol {
    double grad_tol = kDefaultGradientTol;
    std::size_t max_iterations = kDefaultIterationCap;

    LearnOptions options() const {
        LearnOptions o;
        o.tol = grad_tol;
        o.max_iterations = max_iterations;
        return o;
    }
};

void add_learn_tol(CLI::App* app, LearnTol& t) {
    app->add_option("--grad-tol", t.grad_tol, "gradient-norm stopping tolerance")->capture_default_str();
    app->add_option("--max-iterations", t.max_iterations, "iteration cap")->capture_default_str();
}

struct ProxyOpts {
    std::string r_hat;
    std::optional<double> beta;
    double c = 1.0;
    double k = 0.0;
};

void add_proxy(CLI::App* app, ProxyOpts& p) {
    app->add_option("--r-hat", p.r_hat, "proxy reward as comma-separated values");
    app->add_option("--beta", p.beta, "build the proxy as a conflation of degree beta");
    app->add_option("--c", p.c, "conflation scale")->capture_default_str();
    app->add_option("--k", p.k, "conflation offset")->capture_default_str();
}

std::optional<Vector> build_proxy(const ProxyOpts& p, const Vector& r, const Vector& v) {
    if (!p.r_hat.empty() && p.beta)
        throw UsageError("give either --r-hat or --beta, not both");
    if (!p.r_hat.empty()) {
        const auto values = parse_list(p.r_hat);
        if (Eigen::Index(values.size()) != r.size())
            throw InvalidInput("--r-hat has " + std::to_string(values.size()) + " entries, expected " +
                               std::to_string(r.size()));
        return Vector::Map(values.data(), Eigen::Index(values.size()));
    }
    if (p.beta)
        return make_conflated(r, v, *p.beta, p.c, p.k).values();
    return std::nullopt;
}

json proxy_echo(const ProxyOpts& p) {
    json j = json::object();
    if (!p.r_hat.empty())
        j["r-hat"] = parse_list(p.r_hat);
    if (p.beta) {
        j["beta"] = *p.beta;
        j["c"] = p.c;
        j["k"] = p.k;
    }
    return j;
}

json policy_table(const OptimizationResult& opt) {
    json rows = json::array();
    for (const auto& pg : opt.evaluated)
        rows.push_back({{"actions", pg.actions}, {"gain", pg.gain}});
    return rows;
}

int canonical_analyze(const EnvOpts& e, Sink& sink) {
    const auto params = e.params();
    const auto env = load_environment("", params);
    const auto opt = optimize_env(env);
    const Vector v = optimal_value(opt);
    const auto gaps = canonical::closed_form_value_gaps(params);
    const double threshold = canonical::learned_reward_threshold(params.epsilon);
    const json result = {
        {"mdp", io::mdp_to_json(env.mdp, env.r)},
        {"optimal_gain", opt.optimal_gain},
        {"closed_form_gain", canonical::closed_form_gain(params)},
        {"optimal_policy", opt.optimal_actions},
        {"unique", opt.is_unique},
        {"v_star", io::vector_to_json(v)},
        {"value_gaps",
         {{"terminal_minus_common", v(2) - v(0)},
          {"instrumental_minus_terminal", v(1) - v(2)},
          {"closed_form_terminal_minus_common", gaps.gap31},
          {"closed_form_instrumental_minus_terminal", gaps.gap23}}},
        {"occupancy", io::vector_to_json(canonical::aligned_occupancy(params))},
        {"learned_reward_threshold", threshold},
        {"value_proxy_misaligned", canonical::misalignment_condition(v, params.epsilon)},
        {"policies", policy_table(opt)}};
    sink.json_file("canonical.json", result);
    sink.manifest("canonical-analyze", env_echo("", params), json::object(), json::object());
    sink.out() << result.dump(2) << '\n';
    return kOk;
}

int conflation_decompose(const EnvOpts& e, const ProxyOpts& p, Sink& sink) {
    const auto env = load_environment(e.mdp, e.params());
    const Vector v = optimal_value(optimize_env(env));
    const auto r_hat = build_proxy(p, env.r.values(), v);
    if (!r_hat)
        throw UsageError("conflation-decompose needs --r-hat or --beta");
    const auto report = decompose(*r_hat, env.r.values(), v);
    json result = io::report_to_json(report);
    result["r"] = io::vector_to_json(env.r.values());
    result["v_star"] = io::vector_to_json(v);
    result["r_hat"] = io::vector_to_json(*r_hat);
    json config = env_echo(e.mdp, e.params());
    config.update(proxy_echo(p));
    sink.json_file("conflation.json", result);
    sink.manifest("conflation-decompose", config, json::object(), json::object());
    sink.out() << result.dump(2) << '\n';
    return kOk;
}

struct LearnOpts {
    EnvOpts env;
    LearnTol tol;
    std::string comparisons;
    std::string dataset;
    std::size_t n_states = 0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double l2 = kDefaultL2;
    std::size_t gauge_state = 0;
};

int learn(const LearnOpts& o, Sink& sink) {
    LearnOptions options = o.tol.options();
    options.gauge_state = o.gauge_state;
    json config = {{"grad-tol", o.tol.grad_tol},
                   {"max-iterations", o.tol.max_iterations},
                   {"gauge-state", o.gauge_state}};
    json seeds = json::object();
    json result;
    LearnedReward learned;

    if (!o.dataset.empty()) {
        std::ifstream in(o.dataset);
        if (!in)
            throw InvalidInput("cannot open " + o.dataset);
        const auto data = io::read_dataset(in);
        std::size_t n_states = o.n_states;
        if (!o.env.mdp.empty())
            n_states = io::mdp_from_json(io::read_json_file(o.env.mdp)).n_states();
        if (n_states == 0)
            for (const auto& rec : data)
                for (const auto* h : {&rec.h, &rec.h_prime})
                    for (auto s : h->states)
                        n_states = std::max(n_states, s + 1);
        learned = minimize_empirical(data, n_states, o.l2, options);
        config.update({{"dataset", o.dataset}, {"n-states", n_states}, {"l2", o.l2}});
        result = {{"mode", "empirical"}, {"records", data.size()}};
    } else {
        const auto env = load_environment(o.env.mdp, o.env.params());
        if (o.comparisons.empty() && !env.canonical_params)
            throw UsageError("--mdp needs --comparisons");
        const auto d = o.comparisons.empty() ? canonical_comparisons()
                                             : io::comparisons_from_json(io::read_json_file(o.comparisons));
        const Vector v = optimal_value(optimize_env(env));
        config.update(env_echo(o.env.mdp, o.env.params()));
        if (!o.comparisons.empty())
            config["comparisons"] = o.comparisons;
        if (o.n > 0) {
            const auto data = sample_dataset(d, env.r.values(), v, o.n, o.seed);
            std::ostringstream text;
            io::write_dataset(text, data);
            sink.text_file("dataset.jsonl", text.str());
            learned = minimize_empirical(data, env.mdp.n_states(), o.l2, options);
            config.update({{"n", o.n}, {"l2", o.l2}});
            seeds["dataset"] = o.seed;
            result = {{"mode", "empirical"}, {"records", data.size()}};
        } else {
            learned = minimize_asymptotic(d, env.r.values(), v, options);
            result = {{"mode", "asymptotic"}};
        }
        result["v_star"] = io::vector_to_json(v);
        result["max_deviation_from_v_star"] = max_centered_deviation(learned.r_hat.values(), v);
    }
    result["learned"] = io::learned_to_json(learned);
    sink.json_file("learn.json", result);
    sink.manifest("learn", config, seeds, {{"gradient", o.tol.grad_tol}});
    sink.out() << result.dump(2) << '\n';
    return learned.converged ? kOk : kNotConverged;
}

struct PipelineOpts {
    EnvOpts env;
    LearnTol tol;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double l2 = kDefaultL2;
};

PipelineReport run_pipeline(const canonical::Params& params, const PipelineOpts& o) {
    std::optional<SampledMode> sampled;
    if (o.n > 0)
        sampled = SampledMode{o.n, o.seed, o.l2};
    return misalignment_pipeline(params, canonical_comparisons(), sampled, o.tol.options());
}

int pipeline(const PipelineOpts& o, Sink& sink) {
    const auto params = o.env.params();
    canonical::validate(params);
    const auto report = run_pipeline(params, o);
    json config = env_echo("", params);
    config.update({{"grad-tol", o.tol.grad_tol}, {"max-iterations", o.tol.max_iterations}});
    json seeds = json::object();
    if (o.n > 0) {
        config.update({{"n", o.n}, {"l2", o.l2}});
        seeds["dataset"] = o.seed;
    }
    const json result = io::pipeline_to_json(report);
    sink.json_file("pipeline.json", result);
    sink.manifest("pipeline", config, seeds, {{"gradient", o.tol.grad_tol}});
    sink.out() << result.dump(2) << '\n';
    return report.learned.converged ? kOk : kNotConverged;
}

struct SweepOpts {
    std::string m_grid = "2:30:14";
    std::string epsilon_grid = "0.01:0.5:10";
    double beta = 1.0;
    std::string proxy = "conflated";
    std::size_t jobs = 1;
};

struct SweepRow {
    double m;
    double epsilon;
    double threshold;
    double aligned_gain;
    double proxy_true_gain;
    std::size_t proxy_optima;
    bool converged;
    std::vector<Vector> phi_vertices;
};

SweepRow sweep_point(double m, double epsilon, const SweepOpts& o) {
    const canonical::Params params{m, epsilon};
    canonical::validate(params);
    SweepRow row{m, epsilon, canonical::learned_reward_threshold(epsilon), 0.0, 0.0, 0, true, {}};
    row.phi_vertices = compute_polytope(canonical::build(params).first).phi_vertices;
    if (o.proxy == "learned") {
        const auto report = misalignment_pipeline(params, canonical_comparisons());
        row.aligned_gain = report.optimal_gain;
        row.proxy_true_gain = report.achieved_true_gain;
        row.proxy_optima = report.proxy_optimal_policies.size();
        row.converged = report.learned.converged;
        return row;
    }
    const auto [mdp, r] = canonical::build(params);
    const auto opt = canonical::optimize(mdp, r);
    const auto proxy = make_conflated(r.values(), optimal_value(opt), o.beta);
    const auto popt = canonical::optimize(mdp, proxy);
    row.aligned_gain = opt.optimal_gain;
    row.proxy_true_gain = deterministic_gain(mdp, r.values(), popt.optimal_actions);
    row.proxy_optima = popt.all_optimal_policies.size();
    return row;
}

int sweep(const SweepOpts& o, Sink& sink) {
    Grid mg, eg;
    try {
        mg = parse_grid(o.m_grid);
        eg = parse_grid(o.epsilon_grid);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (o.proxy != "conflated" && o.proxy != "learned")
        throw UsageError("--proxy must be 'conflated' or 'learned'");
    if (o.proxy == "conflated" && !(o.beta >= 0.0 && o.beta <= 1.0))
        throw InvalidInput("--beta must lie in [0, 1]");

    std::vector<std::pair<double, double>> points;
    for (double m : mg.values())
        for (double eps : eg.values())
            points.emplace_back(m, eps);

    std::vector<std::optional<SweepRow>> rows(points.size());
    std::vector<std::exception_ptr> errors(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < points.size();) {
            try {
                rows[i] = sweep_point(points[i].first, points[i].second, o);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t jobs = std::clamp<std::size_t>(o.jobs, 1, 64);
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < jobs; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    std::ostringstream csv;
    csv << "m,epsilon,beta,threshold,above_threshold,aligned_gain,proxy_true_gain,misaligned,proxy_optima\n";
    bool all_converged = true;
    for (const auto& row : rows) {
        const bool misaligned = std::abs(row->proxy_true_gain - canonical::kMisalignedGain) <= kGainTieTol;
        csv << format_number(row->m) << ',' << format_number(row->epsilon) << ','
            << format_number(o.proxy == "learned" ? 1.0 : o.beta) << ',' << format_number(row->threshold) << ','
            << (row->m > row->threshold ? 1 : 0) << ',' << format_number(row->aligned_gain) << ','
            << format_number(row->proxy_true_gain) << ',' << (misaligned ? 1 : 0) << ',' << row->proxy_optima
            << '\n';
        all_converged = all_converged && row->converged;
    }
    std::ostringstream vertices;
    vertices << "m,epsilon,vertex,phi1,phi2,phi3,x,y\n";
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row->phi_vertices.size(); ++i) {
            const Vector& phi = row->phi_vertices[i];
            const Point2 p = embed(phi);
            vertices << format_number(row->m) << ',' << format_number(row->epsilon) << ',' << i;
            for (double x : {phi(0), phi(1), phi(2), p.x, p.y})
                vertices << ',' << format_number(x);
            vertices << '\n';
        }
    sink.text_file("sweep.csv", csv.str());
    sink.text_file("sweep_vertices.csv", vertices.str());
    // jobs only affects scheduling, so it stays out of the echo.
    sink.manifest("sweep",
                  {{"m-grid", o.m_grid}, {"epsilon-grid", o.epsilon_grid}, {"beta", o.beta}, {"proxy", o.proxy}},
                  json::object(), json::object());
    sink.out() << csv.str();
    return all_converged ? kOk : kNotConverged;
}

struct GeometryOpts {
    EnvOpts env;
    ProxyOpts proxy;
    std::size_t instrumental_state = canonical::kInstrumental;
};

int geometry(const GeometryOpts& o, Sink& sink) {
    const auto env = load_environment(o.env.mdp, o.env.params());
    const Vector v = optimal_value(optimize_env(env));
    const auto r_hat = build_proxy(o.proxy, env.r.values(), v);
    json config = env_echo(o.env.mdp, o.env.params());
    config.update(proxy_echo(o.proxy));
    if (env.mdp.n_states() != 3) {
        // No planar embedding; raw vertices only.
        const auto poly = compute_polytope(env.mdp);
        json vertices = json::array();
        for (std::size_t i = 0; i < poly.phi_vertices.size(); ++i) {
            const auto& gen = poly.generators[poly.phi_source[i]];
            vertices.push_back({{"distribution", io::vector_to_json(poly.phi_vertices[i])},
                                {"policy", gen.policy},
                                {"recurrent_class", gen.recurrent_class}});
        }
        json result = {{"phi_vertices", vertices},
                       {"reward_projected", io::vector_to_json(project_to_simplex_plane(env.r.values()))},
                       {"value_projected", io::vector_to_json(project_to_simplex_plane(v))}};
        if (r_hat)
            result["proxy_projected"] = io::vector_to_json(project_to_simplex_plane(*r_hat));
        sink.json_file("geometry.json", result);
        sink.manifest("geometry", config, json::object(), json::object());
        sink.out() << result.dump(2) << '\n';
        return kOk;
    }
    const auto g = export_geometry(env.mdp, env.r.values(), v, r_hat, o.instrumental_state);
    json result = io::geometry_to_json(g);
    result["misaligned"] = g.proxy_side ? json(*g.proxy_side == Side::instrumental) : json(nullptr);
    config["instrumental-state"] = o.instrumental_state;
    sink.json_file("geometry.json", result);
    sink.manifest("geometry", config, json::object(), json::object());
    sink.out() << result.dump(2) << '\n';
    return g.side_test_agrees.value_or(true) ? kOk : kFailure;
}

struct TheoremOpts {
    int theorem = 3;
    EnvOpts env;
    CLI::Option* m_opt = nullptr;
    CLI::Option* eps_opt = nullptr;
    double beta_star = 0.05;
    std::size_t trials = 50;
    std::uint64_t seed = 0;
    std::string comparisons;
};

double unit_uniform(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

json theorem1(const TheoremOpts& o, json& config, json& seeds) {
    const auto regime = canonical::theorem1_regime(o.beta_star);
    canonical::Params params;
    params.epsilon = o.eps_opt->count() ? o.env.epsilon : regime.epsilon_bound / 2.0;
    params.m = o.m_opt->count() ? o.env.m : 2.0 * regime.m_bound;
    canonical::validate(params);
    if (!(params.epsilon < regime.epsilon_bound) || !(params.m > regime.m_bound))
        throw InvalidInput("(M, epsilon) lies outside the regime for beta* = " + format_number(o.beta_star));
    const auto [mdp, r] = canonical::build(params);
    const Vector v = optimal_value(canonical::optimize(mdp, r));

    std::mt19937_64 rng(o.seed);
    json trials = json::array();
    bool pass = true;
    for (std::size_t t = 0; t < o.trials; ++t) {
        const double beta = o.beta_star + (1.0 - o.beta_star) * unit_uniform(rng);
        const double c = std::exp(std::log(0.1) + std::log(100.0) * unit_uniform(rng));
        const double k = -10.0 + 20.0 * unit_uniform(rng);
        const auto proxy = make_conflated(r.values(), v, beta, c, k);
        const auto popt = canonical::optimize(mdp, proxy);
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& a : popt.all_optimal_policies)
            worst = std::max(worst, deterministic_gain(mdp, r.values(), a));
        const bool ok = std::abs(worst - canonical::kMisalignedGain) <= kGainTieTol;
        pass = pass && ok;
        trials.push_back({{"beta", beta}, {"c", c}, {"k", k}, {"true_gain", worst}, {"misaligned", ok}});
    }
    config.update({{"beta-star", o.beta_star}, {"m", params.m}, {"epsilon", params.epsilon}, {"trials", o.trials}});
    seeds["gauges"] = o.seed;
    return {{"theorem", 1},
            {"regime", {{"epsilon_below", regime.epsilon_bound}, {"m_above", regime.m_bound}}},
            {"trials", trials},
            {"pass", pass}};
}

json theorem2(const TheoremOpts& o, json& config) {
    const auto env = load_environment(o.env.mdp, o.env.params());
    if (o.comparisons.empty() && !env.canonical_params)
        throw UsageError("--mdp needs --comparisons");
    const auto d = o.comparisons.empty() ? canonical_comparisons()
                                         : io::comparisons_from_json(io::read_json_file(o.comparisons));
    if (!comparison_graph(d, env.mdp.n_states()).connects_all())
        throw InvalidInput("the comparison distribution does not connect all states");
    const Vector v = optimal_value(optimize_env(env));
    const auto learned = minimize_asymptotic(d, env.r.values(), v);
    const double dev = max_centered_deviation(learned.r_hat.values(), v);
    config.update(env_echo(o.env.mdp, o.env.params()));
    if (!o.comparisons.empty())
        config["comparisons"] = o.comparisons;
    return {{"theorem", 2},
            {"v_star", io::vector_to_json(v)},
            {"r_hat", io::vector_to_json(learned.r_hat.values())},
            {"max_deviation", dev},
            {"converged", learned.converged},
            {"pass", learned.converged && dev <= 1e-6}};
}

json theorem3(const TheoremOpts& o, json& config) {
    const auto params = o.env.params();
    canonical::validate(params);
    const auto report = misalignment_pipeline(params, canonical_comparisons());
    const bool pass = report.above_threshold
                          ? report.misaligned
                          : std::abs(report.achieved_true_gain - report.optimal_gain) <= kGainTieTol;
    config.update(env_echo("", params));
    return {{"theorem", 3},
            {"threshold", report.threshold},
            {"above_threshold", report.above_threshold},
            {"misaligned", report.misaligned},
            {"true_gain", report.achieved_true_gain},
            {"aligned_gain", report.optimal_gain},
            {"r_hat", io::vector_to_json(report.learned.r_hat.values())},
            {"converged", report.learned.converged},
            {"pass", report.learned.converged && pass}};
}

int theorem_check(const TheoremOpts& o, Sink& sink) {
    json config = {{"theorem", o.theorem}};
    json seeds = json::object();
    json result;
    switch (o.theorem) {
    case 1: result = theorem1(o, config, seeds); break;
    case 2: result = theorem2(o, config); break;
    case 3: result = theorem3(o, config); break;
    default: throw UsageError("--theorem must be 1, 2 or 3");
    }
    sink.json_file("theorem" + std::to_string(o.theorem) + ".json", result);
    sink.manifest("theorem-check", config, seeds, json::object());
    sink.out() << result.dump(2) << '\n';
    if (result.contains("converged") && !result["converged"].get<bool>())
        return kNotConverged;
    return result["pass"].get<bool>() ? kOk : kFailure;
}

} // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reward-value conflation experiments", "rvc"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.fallthrough();
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    app.add_option("--config", config_path, "JSON file whose keys mirror the flags");
    app.add_option("--output-dir", output_dir, "directory for result files");

    EnvOpts analyze_env;
    auto* analyze = app.add_subcommand("canonical-analyze", "closed forms and exact solution of the canonical example");
    add_env(analyze, analyze_env, false);

    EnvOpts decomp_env;
    ProxyOpts decomp_proxy;
    auto* decomp = app.add_subcommand("conflation-decompose", "fit r_hat = ((1-beta) r + beta V* - k) / c");
    add_env(decomp, decomp_env, true);
    add_proxy(decomp, decomp_proxy);

    LearnOpts learn_opts;
    auto* learn_cmd = app.add_subcommand("learn", "fit a reward from preferences");
    add_env(learn_cmd, learn_opts.env, true);
    add_learn_tol(learn_cmd, learn_opts.tol);
    learn_cmd->add_option("--comparisons", learn_opts.comparisons, "comparison distribution JSON");
    learn_cmd->add_option("--dataset", learn_opts.dataset, "preference dataset (JSON lines)");
    learn_cmd->add_option("--n-states", learn_opts.n_states, "state count for --dataset");
    learn_cmd->add_option("--n", learn_opts.n, "sample this many preferences instead of the asymptotic loss");
    learn_cmd->add_option("--seed", learn_opts.seed, "sampling seed")->capture_default_str();
    learn_cmd->add_option("--l2", learn_opts.l2, "ridge weight for the empirical loss")->capture_default_str();
    learn_cmd->add_option("--gauge-state", learn_opts.gauge_state, "state pinned to zero")->capture_default_str();

    PipelineOpts pipe_opts;
    auto* pipe = app.add_subcommand("pipeline", "learn a proxy on the canonical example and optimize it");
    add_env(pipe, pipe_opts.env, false);
    add_learn_tol(pipe, pipe_opts.tol);
    pipe->add_option("--n", pipe_opts.n, "use n sampled preferences");
    pipe->add_option("--seed", pipe_opts.seed, "sampling seed")->capture_default_str();
    pipe->add_option("--l2", pipe_opts.l2, "ridge weight for the empirical loss")->capture_default_str();

    SweepOpts sweep_opts;
    auto* sweep_cmd = app.add_subcommand("sweep", "grid of proxy-optimal true gains");
    sweep_cmd->add_option("--m-grid", sweep_opts.m_grid, "start:stop:count")->capture_default_str();
    sweep_cmd->add_option("--epsilon-grid", sweep_opts.epsilon_grid, "start:stop:count")->capture_default_str();
    sweep_cmd->add_option("--beta", sweep_opts.beta, "conflation degree of the proxy")->capture_default_str();
    sweep_cmd->add_option("--proxy", sweep_opts.proxy, "conflated or learned")->capture_default_str();
    sweep_cmd->add_option("--jobs", sweep_opts.jobs, "worker threads")->capture_default_str();

    GeometryOpts geo_opts;
    auto* geo = app.add_subcommand("geometry", "planar export of the state-distribution polytope");
    add_env(geo, geo_opts.env, true);
    add_proxy(geo, geo_opts.proxy);
    geo->add_option("--instrumental-state", geo_opts.instrumental_state, "corner closing the top facet")
        ->capture_default_str();

    TheoremOpts thm_opts;
    auto* thm = app.add_subcommand("theorem-check", "numerically check a theorem");
    thm->add_option("--theorem", thm_opts.theorem, "1, 2 or 3")->required();
    add_env(thm, thm_opts.env, true);
    thm_opts.m_opt = thm->get_option("--m");
    thm_opts.eps_opt = thm->get_option("--epsilon");
    thm->add_option("--beta-star", thm_opts.beta_star, "minimum conflation degree (theorem 1)")->capture_default_str();
    thm->add_option("--trials", thm_opts.trials, "random gauges (theorem 1)")->capture_default_str();
    thm->add_option("--seed", thm_opts.seed, "gauge seed (theorem 1)")->capture_default_str();
    thm->add_option("--comparisons", thm_opts.comparisons, "comparison distribution JSON (theorem 2)");

    std::vector<std::string> args = raw_args;
    std::string config_output_dir;
    try {
        // Splice config-file tokens ahead of the user's flags so the flags win.
        for (std::size_t i = 0; i < args.size(); ++i) {
            std::string path;
            if (args[i] == "--config" && i + 1 < args.size())
                path = args[i + 1];
            else if (args[i].rfind("--config=", 0) == 0)
                path = args[i].substr(9);
            else
                continue;
            std::ifstream in(path);
            if (!in)
                throw UsageError("cannot open config " + path);
            json config;
            try {
                config = json::parse(in);
            } catch (const json::exception& e) {
                throw UsageError(path + ": " + e.what());
            }
            std::string command;
            auto tokens = config_tokens(config, command, config_output_dir);
            auto sub_it = std::find_if(args.begin(), args.end(), [&](const std::string& a) {
                return app.get_subcommand_no_throw(a) != nullptr;
            });
            if (sub_it == args.end()) {
                if (command.empty())
                    throw UsageError("no subcommand given on the command line or in the config");
                args.push_back(command);
                sub_it = args.end() - 1;
            } else if (!command.empty() && *sub_it != command) {
                throw UsageError("config command '" + command + "' conflicts with '" + *sub_it + "'");
            }
            args.insert(sub_it + 1, tokens.begin(), tokens.end());
            break;
        }
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const json::exception& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    }

    if (output_dir.empty())
        if (const char* env = std::getenv("RVC_OUTPUT_DIR"); env && *env)
            output_dir = env;
    if (output_dir.empty())
        output_dir = config_output_dir;
    Sink sink(output_dir, out);

    try {
        if (*analyze)
            return canonical_analyze(analyze_env, sink);
        if (*decomp)
            return conflation_decompose(decomp_env, decomp_proxy, sink);
        if (*learn_cmd)
            return learn(learn_opts, sink);
        if (*pipe)
            return pipeline(pipe_opts, sink);
        if (*sweep_cmd)
            return sweep(sweep_opts, sink);
        if (*geo)
            return geometry(geo_opts, sink);
        if (*thm)
            return theorem_check(thm_opts, sink);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        // Error subclasses signal precondition violations; the base class is
        // reserved for I/O trouble, which is also an input problem here.
        err << "input error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}

} // namespace rvc::cli
