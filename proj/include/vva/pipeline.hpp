#pragma once

#include "vva/serialization.hpp"

#include <filesystem>
#include <functional>

namespace vva {

/// End-to-end configuration. Relative paths are resolved against the
/// directory of the config file.
struct PipelineConfig {
    std::filesystem::path manifest;
    std::filesystem::path model;
    std::filesystem::path init_pose;     // optional; zero pose when empty
    std::filesystem::path prior;         // optional
    std::filesystem::path target_poses;  // optional; replay of the fitted track when empty
    std::filesystem::path output;
    KeyframePolicy keyframes;
    int overlap = 2;
    RegistrationParams registration;
    FitParams fit;
    SynthesisParams synthesis;
    int threads = 0;  // 0 = runtime default
    std::uint64_t seed = 0;

    static PipelineConfig from_json(const Json& json, const std::filesystem::path& base_dir);
    Json to_json() const;
    /// Parameter ranges and existence of every referenced input path.
    void validate() const;
};

using Progress = std::function<void(const std::string&)>;

/// Stage outputs. Each writer returns the report it wrote.
Json write_tracking(const TrackedSequence& tracked, const std::vector<std::string>& names,
                    const KeyframePolicy& policy, int overlap, const std::filesystem::path& dir);
/// Reads tracked meshes and groups back from a tracked/ directory.
TrackedSequence read_tracking(const std::filesystem::path& dir, std::vector<std::string>* names = nullptr);

Json write_fits(const PoseTrack& track, const std::filesystem::path& dir);
std::vector<SwingTwistPose> read_fitted_poses(const std::filesystem::path& dir);

Json write_glues(const std::vector<GlueMap>& glues, const std::vector<double>& reconstruction_errors,
                 const std::filesystem::path& dir);
std::vector<GlueMap> read_glues(const std::filesystem::path& dir);

/// Glue map of every tracked frame against the model at its fitted pose,
/// with the reconstruction error at that pose.
std::vector<GlueMap> glue_frames(const std::vector<TriMesh>& frames, const SkinnedModel& model,
                                 const std::vector<SwingTwistPose>& poses, std::vector<double>* errors,
                                 Warnings* warnings);

Json write_synthesis(const SynthesisResult& result, const MotionGraph& graph, const std::filesystem::path& dir);

struct RunOutcome {
    Json report;   // deterministic content
    Json timings;  // wall-clock seconds per stage
    bool ok = true;
};

/// track -> fit -> glue -> synth, writing tracked/, fits/, glue/, synth/,
/// run_report.json and timings.json under config.output. A failing stage is
/// recorded in the report (earlier artifacts stay on disk).
RunOutcome run_pipeline(const PipelineConfig& config, const Progress& progress = {});

/// Human-readable summary of a mesh, manifest, model, pose file or tracked
/// directory / report.
std::string describe_path(const std::filesystem::path& path);

}  // namespace vva
