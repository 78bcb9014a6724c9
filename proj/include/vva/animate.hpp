#pragma once

#include "vva/body_model.hpp"
#include "vva/tracking.hpp"

#include <map>

namespace vva {

struct GlueEntry {
    int face = -1;
    Vec3 bary = Vec3::Zero();  // of the vertex's projection onto the face plane
    double offset = 0.0;       // signed distance along the face normal
};

/// Binding of a captured frame to a posed template. Barycentric coordinates
/// sum to 1; they are those of the orthogonal projection onto the closest
/// face's plane, so they can be slightly negative when the closest point lies
/// on an edge, and reconstruction stays exact.
struct GlueMap {
    std::vector<GlueEntry> entries;  // per frame vertex
    std::vector<Face> faces;         // frame connectivity
    std::size_t template_faces = 0;
    std::vector<int> outliers;  // vertices farther than 10% of the template diagonal
};

GlueMap build_glue_map(const TriMesh& frame, const TriMesh& fitted, Warnings* warnings = nullptr);

/// u a + v b + w c + h n for every entry, against `posed` template geometry.
TriMesh reconstruct(const GlueMap& glue, const TriMesh& posed_template);

/// Skins the model at `target_pose` and reconstructs the glued frame on it.
TriMesh retarget(const GlueMap& glue, const SkinnedModel& model, const SwingTwistPose& target_pose);

/// Sum over joints of the geodesic angle between local rotations (swing *
/// twist) plus the root orientation angle. Root translation is ignored.
double pose_distance(const Skeleton& skeleton, const SwingTwistPose& a, const SwingTwistPose& b);

struct MotionNode {
    std::size_t group = 0;
    std::size_t keyframe = 0;
    std::vector<std::size_t> frames;  // sequence frame indices in playback order
    std::vector<SwingTwistPose> poses;
};

struct MotionEdge {
    std::size_t from = 0, to = 0;
    double cost = 0.0;
    int blend_window = 1;
};

struct MotionGraph {
    std::vector<MotionNode> nodes;
    std::vector<MotionEdge> edges;

    void validate() const;
};

/// One node per tracked group; an edge A -> B (A != B) whenever
/// pose_distance(last(A), first(B)) < cost_threshold. `poses` holds the
/// fitted pose of every sequence frame.
MotionGraph build_motion_graph(const TrackedSequence& tracked, const std::vector<SwingTwistPose>& poses,
                               const Skeleton& skeleton, double cost_threshold, int blend_window = 5);

struct SynthesisParams {
    double lambda = 1.0;  // weight of transition costs
    int beam_width = 8;
    bool exact = false;   // full dynamic program instead of the beam
    double cost_threshold = 1.0;  // radians (summed over joints), graph edges
    int blend_window = 5;
    RegistrationParams registration;

    void validate() const;
};

struct PlanEntry {
    std::size_t node = 0;
    std::size_t index = 0;  // position within the node
    std::size_t frame = 0;  // sequence frame
    double pose_cost = 0.0;
    double transition_cost = 0.0;  // edge cost when this entry starts a new node
    bool held = false;             // repeats the previous frame (fallback only)
    // Pose adjustment applied on top of the source frame's fitted pose.
    Quat delta_root_rotation = Quat::Identity();  // target = delta * source
    Vec3 delta_root_translation = Vec3::Zero();
    std::vector<Vec3> delta_angles;
    // Blend directive: this entry lies `blend_index` frames into a window of
    // `blend_window` frames following a transition from `blend_from`.
    bool blended = false;
    std::size_t blend_from = 0;
    int blend_index = 0;
    int blend_window = 0;
};

struct SynthesisPlan {
    std::vector<PlanEntry> entries;
    double total_cost = 0.0;
    bool exact = false;
    double lambda = 0.0;
};

/// Picks the graph frame sequence minimizing sum_t pose_distance(frame,
/// target_t) + lambda * transition costs. Consecutive entries advance within
/// a node or follow an edge from a node's last frame to another node's first.
/// When no full-length path exists frames may be held, with a warning.
SynthesisPlan plan_synthesis(const MotionGraph& graph, const Skeleton& skeleton,
                             const std::vector<SwingTwistPose>& target, const SynthesisParams& params,
                             Warnings* warnings = nullptr);

/// Meshes for a plan: each entry's frame retargeted to source pose + delta,
/// then transition blending.
std::vector<TriMesh> realize_plan(const SynthesisPlan& plan, const MotionGraph& graph, const SkinnedModel& model,
                                  const std::map<std::size_t, GlueMap>& glues, const RegistrationParams& registration);

struct SynthesisResult {
    SynthesisPlan plan;
    std::vector<TriMesh> meshes;
    Warnings warnings;
};

/// Plans, retargets every selected frame to its exact target pose and blends
/// transitions: the frames after a transition carry the decaying difference
/// between the incoming shape (registered onto the new frame by
/// smooth_transition) and the new frame. `glues` maps sequence frames to
/// their glue maps.
SynthesisResult synthesize(const MotionGraph& graph, const SkinnedModel& model,
                           const std::map<std::size_t, GlueMap>& glues, const std::vector<SwingTwistPose>& target,
                           const SynthesisParams& params);

}  // namespace vva
