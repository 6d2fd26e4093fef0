#include "rvc/io.hpp"

#include "rvc/errors.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace rvc::io {

namespace {

json point_to_json(Point2 p) { return json::array({p.x, p.y}); }

json actions_to_json(const ActionChoice& a) { return json(a); }

template <typename T>
T require(const json& j, const char* key) {
    if (!j.contains(key))
        throw InvalidInput(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("bad field '") + key + "': " + e.what());
    }
}

} // namespace

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.begin(), v.end())); }

Vector vector_from_json(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Vector::Map(values.data(), Eigen::Index(values.size()));
}

json mdp_to_json(const Mdp& mdp, const std::optional<RewardFunction>& reward) {
    json transitions = json::array();
    for (const auto& p : mdp.transitions()) {
        json rows = json::array();
        for (Eigen::Index s = 0; s < p.rows(); ++s)
            rows.push_back(vector_to_json(p.row(s).transpose()));
        transitions.push_back(std::move(rows));
    }
    json j = {{"n_states", mdp.n_states()},
              {"n_actions", mdp.n_actions()},
              {"transitions", std::move(transitions)},
              {"initial_state", mdp.initial_state()}};
    if (reward)
        j["reward"] = vector_to_json(reward->values());
    return j;
}

Mdp mdp_from_json(const json& j) {
    const auto n = require<std::size_t>(j, "n_states");
    const auto na = require<std::size_t>(j, "n_actions");
    const auto raw = require<std::vector<std::vector<std::vector<double>>>>(j, "transitions");
    if (raw.size() != na)
        throw InvalidInput("transitions has " + std::to_string(raw.size()) + " actions, expected " +
                           std::to_string(na));
    std::vector<Matrix> transitions;
    for (const auto& rows : raw) {
        if (rows.size() != n)
            throw InvalidInput("transition matrix has the wrong number of rows");
        Matrix p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t s = 0; s < n; ++s) {
            if (rows[s].size() != n)
                throw InvalidInput("transition row has the wrong length");
            for (std::size_t t = 0; t < n; ++t)
                p(Eigen::Index(s), Eigen::Index(t)) = rows[s][t];
        }
        transitions.push_back(std::move(p));
    }
    return Mdp(std::move(transitions), require<std::size_t>(j, "initial_state"));
}

std::optional<RewardFunction> reward_from_mdp_json(const json& j) {
    if (!j.contains("reward"))
        return std::nullopt;
    RewardFunction r(vector_from_json(j.at("reward")));
    if (r.size() != require<std::size_t>(j, "n_states"))
        throw InvalidInput("reward length does not match n_states");
    return r;
}

json trajectory_to_json(const Trajectory& h) {
    return {{"states", h.states}, {"actions", h.actions}};
}

Trajectory trajectory_from_json(const json& j) {
    Trajectory h{require<std::vector<std::size_t>>(j, "states"),
                 require<std::vector<std::size_t>>(j, "actions")};
    h.validate();
    return h;
}

json comparisons_to_json(const ComparisonDistribution& d) {
    json out = json::array();
    for (const auto& wp : d.support())
        out.push_back({{"h", trajectory_to_json(wp.pair.h)},
                       {"hp", trajectory_to_json(wp.pair.h_prime)},
                       {"probability", wp.probability}});
    return out;
}

ComparisonDistribution comparisons_from_json(const json& j) {
    if (!j.is_array())
        throw InvalidInput("comparison distribution must be a list");
    std::vector<WeightedPair> support;
    for (const auto& item : j)
        support.push_back({{trajectory_from_json(item.at("h")), trajectory_from_json(item.at("hp"))},
                           require<double>(item, "probability")});
    return ComparisonDistribution(std::move(support));
}

void write_dataset(std::ostream& out, const PreferenceDataset& data) {
    for (const auto& rec : data)
        out << json{{"h", trajectory_to_json(rec.h)}, {"hp", trajectory_to_json(rec.h_prime)}, {"y", rec.y}}
                   .dump()
            << '\n';
}

PreferenceDataset read_dataset(std::istream& in) {
    PreferenceDataset data;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InvalidInput("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
        const int y = require<int>(j, "y");
        if (y != 0 && y != 1)
            throw InvalidInput("dataset line " + std::to_string(lineno) + ": y must be 0 or 1");
        data.push_back({trajectory_from_json(j.at("h")), trajectory_from_json(j.at("hp")), y});
    }
    return data;
}

json report_to_json(const ConflationReport& report) {
    const auto& u = report.uniqueness;
    return {{"is_conflation", report.is_conflation},
            {"c", report.c},
            {"k", report.k},
            {"beta", report.beta},
            {"residual", report.residual},
            {"uniqueness",
             {{"r_constant", u.r_constant},
              {"v_constant", u.v_constant},
              {"r_equiv_v", u.r_equiv_v},
              {"r_equiv_neg_v", u.r_equiv_neg_v},
              {"beta_unique", u.beta_unique}}}};
}

json learned_to_json(const LearnedReward& learned) {
    json curve = json::array();
    for (const auto& [it, loss] : learned.loss_curve)
        curve.push_back({{"iteration", it}, {"loss", loss}});
    return {{"r_hat", vector_to_json(learned.r_hat.values())},
            {"final_loss", learned.final_loss},
            {"gradient_norm", learned.gradient_norm},
            {"iterations", learned.iterations},
            {"converged", learned.converged},
            {"note", learned.note},
            {"gauge", learned.gauge},
            {"identified", learned.identified},
            {"loss_curve", std::move(curve)}};
}

json pipeline_to_json(const PipelineReport& report) {
    json alternatives = json::array();
    for (const auto& p : report.proxy_optimal_policies)
        alternatives.push_back(actions_to_json(p));
    return {{"m", report.params.m},
            {"epsilon", report.params.epsilon},
            {"threshold", report.threshold},
            {"above_threshold", report.above_threshold},
            {"optimal_gain", report.optimal_gain},
            {"v_star", vector_to_json(report.v_star)},
            {"learned", learned_to_json(report.learned)},
            {"proxy_policy", actions_to_json(report.proxy_policy)},
            {"proxy_optimal_policies", std::move(alternatives)},
            {"achieved_true_gain", report.achieved_true_gain},
            {"misaligned", report.misaligned}};
}

json geometry_to_json(const GeometryExport& g) {
    json simplex = json::array();
    for (std::size_t i = 0; i < g.simplex_vertices.size(); ++i)
        simplex.push_back({{"label", g.labels.at(i)}, {"point", point_to_json(g.simplex_vertices[i])}});
    json vertices = json::array();
    for (std::size_t i = 0; i < g.phi_vertices.size(); ++i) {
        std::string label;
        if (i == g.aligned_vertex)
            label = "aligned";
        else if (g.instrumental_vertex && i == *g.instrumental_vertex)
            label = "instrumental";
        vertices.push_back({{"label", label},
                            {"point", point_to_json(g.phi_points[i])},
                            {"distribution", vector_to_json(g.phi_vertices[i])}});
    }
    json facets = json::array();
    for (const auto& f : g.facets)
        facets.push_back({{"from", f.from}, {"to", f.to}, {"outward_normal", point_to_json(f.outward_normal)}});

    json directions = {
        {"reward", {{"direction", point_to_json(g.reward_direction)}, {"projected", vector_to_json(g.reward_projected)}}},
        {"value", {{"direction", point_to_json(g.value_direction)}, {"projected", vector_to_json(g.value_projected)}}},
        {"normal", {{"direction", point_to_json(g.normal_direction)}}}};
    if (g.proxy_direction)
        directions["proxy"] = {{"direction", point_to_json(*g.proxy_direction)},
                               {"projected", vector_to_json(*g.proxy_projected)}};

    json j = {{"simplex_vertices", std::move(simplex)},
              {"phi_vertices", std::move(vertices)},
              {"phi_area", g.phi_area},
              {"facets", std::move(facets)},
              {"directions", std::move(directions)},
              {"aligned_vertex", g.aligned_vertex},
              {"reward_side", to_string(g.reward_side)}};
    j["side_test_agrees"] = g.side_test_agrees ? json(*g.side_test_agrees) : json(nullptr);
    j["instrumental_vertex"] = g.instrumental_vertex ? json(*g.instrumental_vertex) : json(nullptr);
    j["proxy_side"] = g.proxy_side ? json(to_string(*g.proxy_side)) : json(nullptr);
    j["proxy_argmax"] = g.proxy_argmax ? json(*g.proxy_argmax) : json(nullptr);
    j["proxy_cone_vertex"] = g.proxy_cone_vertex ? json(*g.proxy_cone_vertex) : json(nullptr);
    return j;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InvalidInput("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path);
    out << j.dump(2) << '\n';
}

} // namespace rvc::io
