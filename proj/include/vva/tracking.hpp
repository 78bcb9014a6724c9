#pragma once

#include "vva/registration.hpp"

namespace vva {

struct KeyframePolicy {
    enum class Mode { EveryNth, Scored };
    Mode mode = Mode::EveryNth;
    int n = 10;
    double w_area = 1.0;
    double w_genus = 1.0;

    /// "every_nth:N" or "scored:N".
    static KeyframePolicy parse(const std::string& text);
    std::string to_string() const;
    void validate() const;
};

/// Genus used for keyframe scoring: sum over closed components, each
/// flagged (open or non-manifold) component counted as 1.
int scoring_genus(const TriMesh& mesh);

/// Keyframes plus Voronoi groups in time (ties to the earlier keyframe).
/// Scored mode picks, in every window [i*n, (i+1)*n), the frame maximizing
/// w_area * z(area) - w_genus * genus (z-score within the window; earliest on
/// ties).
std::vector<FrameGroup> select_keyframes(const MeshSequence& seq, const KeyframePolicy& policy);
/// Same rule on precomputed per-frame areas and genera.
std::vector<FrameGroup> select_keyframes(const std::vector<double>& areas, const std::vector<int>& genus,
                                         const KeyframePolicy& policy);
/// Voronoi grouping for given keyframes (sorted, unique).
std::vector<FrameGroup> group_by_keyframes(const std::vector<std::size_t>& keyframes, std::size_t frame_count);

struct TrackedFrame {
    std::size_t frame = 0;
    std::size_t keyframe = 0;
    TriMesh mesh;  // keyframe connectivity
    double error = 0.0;
    int chain_length = 0;  // registrations between the keyframe and this frame
    bool converged = true;
};

struct GroupTrack {
    std::size_t keyframe = 0;
    std::size_t first = 0, last = 0;  // tracked range, inclusive
    std::vector<TrackedFrame> frames;  // first..last in order
};

/// Chained registration outwards from the keyframe: each frame is reached by
/// registering the previous frame's tracked mesh onto it.
GroupTrack track_group(const MeshSequence& seq, std::size_t keyframe, std::size_t first, std::size_t last,
                       const RegistrationParams& params);

struct MergeDecision {
    std::size_t frame = 0;
    std::size_t chosen_keyframe = 0;
    double chosen_error = 0.0;
    std::vector<std::pair<std::size_t, double>> rejected;  // (keyframe, error)
};

struct TrackedGroup {
    std::size_t keyframe = 0;
    std::vector<std::size_t> members;  // sorted frame indices
};

struct TrackedSequence {
    std::vector<TrackedGroup> groups;
    std::vector<TrackedFrame> frames;  // one per input frame, in order
    std::vector<MergeDecision> merges;
    Warnings warnings;
};

/// Tracks every group over its range widened by `overlap` frames per side
/// and keeps, for frames tracked more than once, the candidate with the
/// smaller registration error (earlier keyframe on ties).
TrackedSequence track_sequence(const MeshSequence& seq, const KeyframePolicy& policy, const RegistrationParams& params,
                               int overlap = 2);
TrackedSequence track_sequence(const MeshSequence& seq, const std::vector<FrameGroup>& groups,
                               const RegistrationParams& params, int overlap = 2);

/// Registers a_end onto b_start and returns `window` meshes interpolating
/// linearly from a_end (first) to the registered mesh (last).
std::vector<TriMesh> smooth_transition(const TriMesh& a_end, const TriMesh& b_start, int window,
                                       const RegistrationParams& params);
/// Interpolation part only, for a registration computed elsewhere.
std::vector<TriMesh> interpolate_meshes(const TriMesh& from, const TriMesh& to, int window);

}  // namespace vva
