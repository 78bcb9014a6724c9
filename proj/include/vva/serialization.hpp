#pragma once

#include "vva/animate.hpp"
#include "vva/deformation_graph.hpp"
#include "vva/fitting.hpp"

#include <filesystem>
#include <json.hpp>

namespace vva {

using Json = nlohmann::json;

/// Rounds to 9 significant digits; report values go through this so the
/// written text is short and stable. Non-finite values become null.
Json report_number(double value);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed, keys sorted, trailing newline.
void write_json(const Json& json, const std::filesystem::path& path);

Json pose_to_json(const SwingTwistPose& pose);
SwingTwistPose pose_from_json(const Json& json);
Json poses_to_json(const std::vector<SwingTwistPose>& poses);
std::vector<SwingTwistPose> poses_from_json(const Json& json);

Json skeleton_to_json(const Skeleton& skeleton);
Skeleton skeleton_from_json(const Json& json);

/// Model JSON references its template mesh by a path relative to the JSON
/// file; save_model writes both (mesh as binary PLY next to the JSON).
void save_model(const SkinnedModel& model, const std::filesystem::path& json_path);
SkinnedModel load_model(const std::filesystem::path& json_path);

Json prior_to_json(const PosePriorGMM& prior);
PosePriorGMM prior_from_json(const Json& json);

Json graph_to_json(const DeformationGraph& graph);
DeformationGraph graph_from_json(const Json& json);

Json glue_to_json(const GlueMap& glue);
GlueMap glue_from_json(const Json& json);

Json motion_graph_to_json(const MotionGraph& graph);
MotionGraph motion_graph_from_json(const Json& json);

Json plan_to_json(const SynthesisPlan& plan);
SynthesisPlan plan_from_json(const Json& json);

Json registration_params_to_json(const RegistrationParams& p);
RegistrationParams registration_params_from_json(const Json& json, RegistrationParams base = {});
Json fit_params_to_json(const FitParams& p);
FitParams fit_params_from_json(const Json& json, FitParams base = {});
Json synthesis_params_to_json(const SynthesisParams& p);
SynthesisParams synthesis_params_from_json(const Json& json, SynthesisParams base = {});

/// Sequence manifest: {"frame_rate": 25, "frames": ["f000.ply", ...]} with
/// paths relative to the manifest.
struct Manifest {
    double frame_rate = 25.0;
    std::vector<std::filesystem::path> frames;  // resolved
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::vector<std::string>& frame_names, double frame_rate, const std::filesystem::path& path);
MeshSequence load_sequence(const Manifest& manifest);

}  // namespace vva
