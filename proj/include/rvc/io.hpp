#pragma once

#include "rvc/conflation.hpp"
#include "rvc/mdp.hpp"
#include "rvc/polytope.hpp"
#include "rvc/preference.hpp"
#include "rvc/reward_learning.hpp"

#include <iosfwd>
#include <optional>
#include <string>

#include "json.hpp"

namespace rvc::io {

using nlohmann::json;

/// Bumped whenever any emitted document changes shape.
inline constexpr int kSchemaVersion = 1;

json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j);

/// {"n_states", "n_actions", "transitions": [a][s][s'], "initial_state", "reward"?}
json mdp_to_json(const Mdp& mdp, const std::optional<RewardFunction>& reward = std::nullopt);
Mdp mdp_from_json(const json& j);
std::optional<RewardFunction> reward_from_mdp_json(const json& j);

json trajectory_to_json(const Trajectory& h);
Trajectory trajectory_from_json(const json& j);

/// [{"h": {...}, "hp": {...}, "probability": p}, ...]
json comparisons_to_json(const ComparisonDistribution& d);
ComparisonDistribution comparisons_from_json(const json& j);

/// One record per line: {"h": {"states", "actions"}, "hp": {...}, "y": 0|1}.
void write_dataset(std::ostream& out, const PreferenceDataset& data);
PreferenceDataset read_dataset(std::istream& in);

json report_to_json(const ConflationReport& report);
json learned_to_json(const LearnedReward& learned);
json pipeline_to_json(const PipelineReport& report);
json geometry_to_json(const GeometryExport& g);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

} // namespace rvc::io
