#pragma once

#include "vva/mesh.hpp"
#include "vva/rotation.hpp"

#include <Eigen/Dense>
#include <optional>

namespace vva {

/// Per-joint box limits on (swing1, swing2, twist), radians.
struct JointLimits {
    Vec3 lower = Vec3::Constant(-M_PI);
    Vec3 upper = Vec3::Constant(M_PI);
};

/// Rest frames carry no rotation: offsets and twist axes are expressed in
/// model axes, so a joint's rest transform is a pure translation to its
/// accumulated offset.
struct Joint {
    std::string name;
    int parent = -1;
    Vec3 offset = Vec3::Zero();  // from parent joint (root: absolute rest position)
    Vec3 twist_axis = Vec3::UnitY();
    std::optional<JointLimits> limits;
};

struct Skeleton {
    std::vector<Joint> joints;

    std::size_t size() const { return joints.size(); }
    /// Throws ValidationError for cycles, a non-leading root, bad parents or
    /// non-unit twist axes, naming the joint.
    void validate() const;
    std::vector<Vec3> rest_positions() const;
    std::vector<std::vector<int>> children() const;
    /// is_ancestor_or_self[a][b]: joint a is b or an ancestor of b.
    std::vector<std::vector<char>> ancestry() const;
};

/// Swing is a rotation vector restricted to the plane orthogonal to the twist
/// axis, stored in the joint's orthonormal_basis(twist_axis) coordinates.
struct JointAngles {
    Vec2 swing = Vec2::Zero();
    double twist = 0.0;

    Vec3 as_vector() const { return {swing.x(), swing.y(), twist}; }
    static JointAngles from_vector(const Vec3& v) { return {Vec2(v.x(), v.y()), v.z()}; }
};

struct SwingTwistPose {
    Quat root_rotation = Quat::Identity();
    Vec3 root_translation = Vec3::Zero();
    std::vector<JointAngles> joints;  // one per skeleton joint

    static SwingTwistPose zero(std::size_t joint_count);
};

Quat joint_swing(const Joint& joint, const JointAngles& angles);
Quat joint_twist(const Joint& joint, const JointAngles& angles);
/// Local joint rotation swing * twist.
Quat joint_rotation(const Joint& joint, const JointAngles& angles);
/// Inverse of joint_rotation: splits a local rotation into angles.
JointAngles joint_angles_from_rotation(const Joint& joint, const Quat& local);

struct JointTransform {
    Quat rotation = Quat::Identity();        // full global rotation
    Quat swing_rotation = Quat::Identity();  // global rotation without the joint's own twist
    Vec3 position = Vec3::Zero();            // global joint position
};

/// global = parent global * rest offset * swing * twist; the root is placed by
/// the pose's root transform. Throws InvalidArgument on dimension mismatch.
std::vector<JointTransform> forward_kinematics(const Skeleton& skeleton, const SwingTwistPose& pose);

struct SkinInfluence {
    int joint = 0;
    double weight = 0.0;
};

inline constexpr std::size_t kMaxInfluences = 8;

struct SkinnedModel {
    TriMesh mesh;
    Skeleton skeleton;
    std::vector<std::vector<SkinInfluence>> weights;  // per vertex

    /// Throws ValidationError naming the first offending vertex or joint.
    void validate() const;
};

/// Hybrid skinning: per vertex, the influencing joints' twists are blended as
/// dual quaternions in rest space (signs aligned to the heaviest influence),
/// then the swing-and-ancestor transforms are applied by linear blending.
/// Parallel over vertices; bit-identical to skin_serial.
TriMesh skin(const SkinnedModel& model, const SwingTwistPose& pose);
TriMesh skin_serial(const SkinnedModel& model, const SwingTwistPose& pose);

/// Plain linear blend skinning with the full joint transforms; the reference
/// the hybrid scheme is compared against.
TriMesh skin_lbs(const SkinnedModel& model, const SwingTwistPose& pose);

/// Free pose parameters used by fitting: root translation (3), root rotation
/// increment (3, left-multiplied), then (swing1, swing2, twist) for every
/// non-root joint. The root joint's own angles are held fixed.
struct PoseParameterization {
    explicit PoseParameterization(const Skeleton& skeleton);

    std::size_t size() const { return 6 + 3 * joint_slots.size(); }
    /// Parameter offset of joint j's angles, or -1 for the root.
    int offset_of(int joint) const { return joint_offset[joint]; }

    SwingTwistPose apply(const SwingTwistPose& pose, const Eigen::VectorXd& delta) const;

    std::vector<int> joint_slots;   // non-root joint ids in parameter order
    std::vector<int> joint_offset;  // per joint
};

/// Skinned positions and their Jacobian with respect to the pose parameters
/// (rows 3v..3v+2 for vertex v). `vertices` restricts the rows; empty = all.
struct SkinJacobian {
    std::vector<Vec3> positions;
    Eigen::MatrixXd jacobian;
};

SkinJacobian skin_with_jacobian(const SkinnedModel& model, const SwingTwistPose& pose,
                                const PoseParameterization& params, const std::vector<int>& vertices = {});

/// Per-vertex map x -> A x + b of the hybrid skin at a fixed pose, plus the
/// derivative of the skinned vertex with respect to every joint's rest offset.
/// Used by shape adaptation (skinned vertices are affine in template vertices
/// and in rest offsets).
struct SkinLinearization {
    std::vector<Mat3> vertex_jacobian;                          // d v' / d v_template
    std::vector<std::vector<std::pair<int, Mat3>>> offset_jacobian;  // per vertex: (joint, d v' / d offset_joint)
    std::vector<Vec3> positions;
};

SkinLinearization skin_linearization(const SkinnedModel& model, const SwingTwistPose& pose);

/// Clamps every angle into its joint limits (if any) and swing magnitude
/// below pi. Returns true if anything changed.
bool clamp_to_limits(const Skeleton& skeleton, SwingTwistPose& pose);
bool within_limits(const Skeleton& skeleton, const SwingTwistPose& pose, double tol = 0.0);

/// Flattened (swing1, swing2, twist) of every joint, the pose prior's domain.
Eigen::VectorXd pose_scalars(const SwingTwistPose& pose);

}  // namespace vva
