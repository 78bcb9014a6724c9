#include "vva/body_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vva {

// ---------------------------------------------------------------- skeleton

void Skeleton::validate() const {
    if (joints.empty()) throw ValidationError("skeleton has no joints");
    if (joints[0].parent != -1) throw ValidationError("joint 0 ('" + joints[0].name + "') must be the root");
    const int n = static_cast<int>(joints.size());
    for (int j = 0; j < n; ++j) {
        const Joint& jt = joints[j];
        const std::string label = "joint " + std::to_string(j) + " ('" + jt.name + "')";
        if (j > 0 && jt.parent < 0) throw ValidationError(label + " is a second root");
        if (jt.parent >= n || jt.parent == j) throw ValidationError(label + " has invalid parent " + std::to_string(jt.parent));
        if (std::abs(jt.twist_axis.norm() - 1.0) > 1e-9) throw ValidationError(label + " twist axis is not unit length");
        if (jt.limits) {
            if ((jt.limits->lower.array() > jt.limits->upper.array()).any())
                throw ValidationError(label + " has lower limit above upper limit");
        }
    }
    // Walk each parent chain; more than n steps means a cycle.
    for (int j = 0; j < n; ++j) {
        int cur = j, steps = 0;
        while (cur >= 0) {
            cur = joints[cur].parent;
            if (++steps > n) throw ValidationError("joint " + std::to_string(j) + " ('" + joints[j].name + "') is part of a parent cycle");
        }
    }
}

std::vector<Vec3> Skeleton::rest_positions() const {
    std::vector<Vec3> pos(joints.size());
    // Parents may be listed after children; resolve recursively by memoized walk.
    std::vector<char> done(joints.size(), 0);
    for (std::size_t j = 0; j < joints.size(); ++j) {
        std::vector<int> chain;
        int cur = static_cast<int>(j);
        while (cur >= 0 && !done[cur]) {
            chain.push_back(cur);
            cur = joints[cur].parent;
        }
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
            const Joint& jt = joints[*it];
            pos[*it] = jt.parent < 0 ? jt.offset : Vec3(pos[jt.parent] + jt.offset);
            done[*it] = 1;
        }
    }
    return pos;
}

std::vector<std::vector<int>> Skeleton::children() const {
    std::vector<std::vector<int>> ch(joints.size());
    for (std::size_t j = 0; j < joints.size(); ++j)
        if (joints[j].parent >= 0) ch[joints[j].parent].push_back(static_cast<int>(j));
    return ch;
}

std::vector<std::vector<char>> Skeleton::ancestry() const {
    const std::size_t n = joints.size();
    std::vector<std::vector<char>> anc(n, std::vector<char>(n, 0));
    for (std::size_t b = 0; b < n; ++b)
        for (int a = static_cast<int>(b); a >= 0; a = joints[a].parent) anc[a][b] = 1;
    return anc;
}

SwingTwistPose SwingTwistPose::zero(std::size_t joint_count) {
    SwingTwistPose p;
    p.joints.assign(joint_count, JointAngles{});
    return p;
}

Quat joint_swing(const Joint& joint, const JointAngles& angles) {
    const auto [b1, b2] = orthonormal_basis(joint.twist_axis);
    return quat_exp(angles.swing.x() * b1 + angles.swing.y() * b2);
}

Quat joint_twist(const Joint& joint, const JointAngles& angles) {
    return Quat(Eigen::AngleAxisd(angles.twist, joint.twist_axis));
}

Quat joint_rotation(const Joint& joint, const JointAngles& angles) {
    return joint_swing(joint, angles) * joint_twist(joint, angles);
}

JointAngles joint_angles_from_rotation(const Joint& joint, const Quat& local) {
    const SwingTwistSplit split = swing_twist_decompose(local, joint.twist_axis);
    const auto [b1, b2] = orthonormal_basis(joint.twist_axis);
    const Vec3 phi = quat_log(split.swing);
    return {Vec2(phi.dot(b1), phi.dot(b2)), split.twist_angle};
}

std::vector<JointTransform> forward_kinematics(const Skeleton& skeleton, const SwingTwistPose& pose) {
    if (pose.joints.size() != skeleton.size())
        throw InvalidArgument("pose has " + std::to_string(pose.joints.size()) + " joints, skeleton has " +
                              std::to_string(skeleton.size()));
    std::vector<JointTransform> out(skeleton.size());
    // Joints are processed in index order; validate() guarantees the root
    // comes first, and parents before children is required here.
    for (std::size_t j = 0; j < skeleton.size(); ++j) {
        const Joint& jt = skeleton.joints[j];
        const Quat swing = joint_swing(jt, pose.joints[j]);
        const Quat twist = joint_twist(jt, pose.joints[j]);
        JointTransform& g = out[j];
        if (jt.parent < 0) {
            g.position = pose.root_rotation * jt.offset + pose.root_translation;
            g.swing_rotation = pose.root_rotation * swing;
        } else {
            if (static_cast<std::size_t>(jt.parent) >= j)
                throw InvalidArgument("forward_kinematics requires parents listed before children (joint " +
                                      std::to_string(j) + ")");
            const JointTransform& p = out[jt.parent];
            g.position = p.position + p.rotation * jt.offset;
            g.swing_rotation = p.rotation * swing;
        }
        g.rotation = g.swing_rotation * twist;
    }
    return out;
}

// ---------------------------------------------------------------- model

void SkinnedModel::validate() const {
    skeleton.validate();
    validate_mesh(mesh);
    if (weights.size() != mesh.vertices.size())
        throw ValidationError("weights given for " + std::to_string(weights.size()) + " vertices, mesh has " +
                              std::to_string(mesh.vertices.size()));
    const int nj = static_cast<int>(skeleton.size());
    for (std::size_t v = 0; v < weights.size(); ++v) {
        const auto& row = weights[v];
        const std::string label = "vertex " + std::to_string(v);
        if (row.empty()) throw ValidationError(label + " has no skinning influences");
        if (row.size() > kMaxInfluences) throw ValidationError(label + " has more than 8 influences");
        double sum = 0.0;
        for (const SkinInfluence& inf : row) {
            if (inf.joint < 0 || inf.joint >= nj) throw ValidationError(label + " references unknown joint " + std::to_string(inf.joint));
            if (!(inf.weight >= 0.0)) throw ValidationError(label + " has a negative weight");
            sum += inf.weight;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            std::ostringstream os;
            os << label << " weights sum to " << sum << " (expected 1)";
            throw ValidationError(os.str());
        }
    }
}

namespace {

struct JointCache {
    Mat3 swing_rotation;  // R^s
    Mat3 rotation;        // full global R
    Vec3 position;        // posed
    Vec3 rest;            // rest position
    DualQuat twist;       // rest-space twist about the axis through `rest`
    Mat3 twist_matrix;
};

struct PoseCache {
    std::vector<JointCache> joints;
    std::vector<JointTransform> fk;
};

PoseCache make_cache(const Skeleton& skel, const SwingTwistPose& pose) {
    PoseCache cache;
    cache.fk = forward_kinematics(skel, pose);
    const std::vector<Vec3> rest = skel.rest_positions();
    cache.joints.resize(skel.size());
    for (std::size_t j = 0; j < skel.size(); ++j) {
        JointCache& c = cache.joints[j];
        c.swing_rotation = cache.fk[j].swing_rotation.toRotationMatrix();
        c.rotation = cache.fk[j].rotation.toRotationMatrix();
        c.position = cache.fk[j].position;
        c.rest = rest[j];
        const Joint& jt = skel.joints[j];
        const Quat r = joint_twist(jt, pose.joints[j]);
        c.twist_matrix = r.toRotationMatrix();
        // Translation part in displacement form so a zero twist is exactly zero.
        const Vec3 t = c.rest - r * c.rest;
        c.twist = DualQuat::from_rigid(r, pose.joints[j].twist == 0.0 ? Vec3::Zero() : t);
    }
    return cache;
}

int heaviest(const std::vector<SkinInfluence>& row) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(row.size()); ++i)
        if (row[i].weight > row[best].weight || (row[i].weight == row[best].weight && row[i].joint < row[best].joint)) best = i;
    return best;
}

struct TwistBlend {
    QuatV c0{0.0, Vec3::Zero()};
    QuatV ce{0.0, Vec3::Zero()};
    std::array<double, kMaxInfluences> sign{};
};

TwistBlend blend_twists(const PoseCache& cache, const std::vector<SkinInfluence>& row) {
    TwistBlend b;
    const QuatV& pivot = cache.joints[row[heaviest(row)].joint].twist.real;
    for (std::size_t i = 0; i < row.size(); ++i) {
        const DualQuat& dq = cache.joints[row[i].joint].twist;
        const double s = dq.real.dot(pivot) < 0.0 ? -1.0 : 1.0;
        b.sign[i] = s;
        b.c0 = b.c0 + dq.real * (s * row[i].weight);
        b.ce = b.ce + dq.dual * (s * row[i].weight);
    }
    return b;
}

// Linear-blend stage in displacement form: v1 + sum_j w_j (S_j(v1) - v1).
Vec3 swing_stage(const PoseCache& cache, const std::vector<SkinInfluence>& row, const Vec3& v1) {
    Vec3 disp = Vec3::Zero();
    for (const SkinInfluence& inf : row) {
        const JointCache& c = cache.joints[inf.joint];
        const Vec3 local = v1 - c.rest;
        disp += inf.weight * ((c.swing_rotation * local - local) + (c.position - c.rest));
    }
    return v1 + disp;
}

Vec3 skin_vertex(const PoseCache& cache, const std::vector<SkinInfluence>& row, const Vec3& v) {
    const TwistBlend b = blend_twists(cache, row);
    const Vec3 v1 = dq_apply_blended(b.c0, b.ce, v);
    return swing_stage(cache, row, v1);
}

}  // namespace

TriMesh skin(const SkinnedModel& model, const SwingTwistPose& pose) {
    const PoseCache cache = make_cache(model.skeleton, pose);
    TriMesh out = model.mesh;
    const long long n = static_cast<long long>(out.vertices.size());
#pragma omp parallel for schedule(static)
    for (long long v = 0; v < n; ++v) out.vertices[v] = skin_vertex(cache, model.weights[v], model.mesh.vertices[v]);
    return out;
}

TriMesh skin_serial(const SkinnedModel& model, const SwingTwistPose& pose) {
    const PoseCache cache = make_cache(model.skeleton, pose);
    TriMesh out = model.mesh;
    for (std::size_t v = 0; v < out.vertices.size(); ++v)
        out.vertices[v] = skin_vertex(cache, model.weights[v], model.mesh.vertices[v]);
    return out;
}

TriMesh skin_lbs(const SkinnedModel& model, const SwingTwistPose& pose) {
    const PoseCache cache = make_cache(model.skeleton, pose);
    TriMesh out = model.mesh;
    for (std::size_t v = 0; v < out.vertices.size(); ++v) {
        const Vec3& p = model.mesh.vertices[v];
        Vec3 disp = Vec3::Zero();
        for (const SkinInfluence& inf : model.weights[v]) {
            const JointCache& c = cache.joints[inf.joint];
            const Vec3 local = p - c.rest;
            disp += inf.weight * ((c.rotation * local - local) + (c.position - c.rest));
        }
        out.vertices[v] = p + disp;
    }
    return out;
}

// ---------------------------------------------------------------- parameterization

PoseParameterization::PoseParameterization(const Skeleton& skeleton) {
    joint_offset.assign(skeleton.size(), -1);
    for (std::size_t j = 0; j < skeleton.size(); ++j) {
        if (skeleton.joints[j].parent < 0) continue;
        joint_offset[j] = static_cast<int>(6 + 3 * joint_slots.size());
        joint_slots.push_back(static_cast<int>(j));
    }
}

SwingTwistPose PoseParameterization::apply(const SwingTwistPose& pose, const Eigen::VectorXd& delta) const {
    SwingTwistPose out = pose;
    out.root_translation += delta.segment<3>(0);
    out.root_rotation = (quat_exp(delta.segment<3>(3)) * pose.root_rotation).normalized();
    for (int j : joint_slots) {
        const int o = joint_offset[j];
        out.joints[j].swing += Vec2(delta[o], delta[o + 1]);
        out.joints[j].twist += delta[o + 2];
    }
    return out;
}

SkinJacobian skin_with_jacobian(const SkinnedModel& model, const SwingTwistPose& pose,
                                const PoseParameterization& params, const std::vector<int>& vertices) {
    const Skeleton& skel = model.skeleton;
    const PoseCache cache = make_cache(skel, pose);
    const std::size_t nj = skel.size();

    // Global angular velocity per unit change of each joint parameter.
    std::vector<std::array<Vec3, 3>> omega(nj);
    std::vector<DualQuat> twist_derivative(nj);
    for (std::size_t j = 0; j < nj; ++j) {
        const Joint& jt = skel.joints[j];
        const auto [b1, b2] = orthonormal_basis(jt.twist_axis);
        const Vec3 phi = pose.joints[j].swing.x() * b1 + pose.joints[j].swing.y() * b2;
        const Mat3 jl = so3_left_jacobian(phi);
        const Mat3 parent_rot = jt.parent < 0 ? pose.root_rotation.toRotationMatrix() : cache.joints[jt.parent].rotation;
        omega[j][0] = parent_rot * (jl * b1);
        omega[j][1] = parent_rot * (jl * b2);
        omega[j][2] = cache.joints[j].swing_rotation * jt.twist_axis;

        // d/dtau of the rest-space twist dual quaternion.
        const DualQuat& dq = cache.joints[j].twist;
        const QuatV dr = (QuatV{0.0, jt.twist_axis} * dq.real) * 0.5;
        const Vec3 rotated_rest = cache.joints[j].twist_matrix * cache.joints[j].rest;
        const Vec3 t = cache.joints[j].rest - rotated_rest;
        const Vec3 dt = -jt.twist_axis.cross(rotated_rest);
        twist_derivative[j].real = dr;
        twist_derivative[j].dual = (QuatV{0.0, dt} * dq.real) * 0.5 + (QuatV{0.0, t} * dr) * 0.5;
    }

    std::vector<int> rows = vertices;
    if (rows.empty()) {
        rows.resize(model.mesh.vertices.size());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
    }
    SkinJacobian out;
    out.positions.resize(rows.size());
    out.jacobian = Eigen::MatrixXd::Zero(3 * rows.size(), params.size());
    const Vec3 root_t = pose.root_translation;

    for (std::size_t r = 0; r < rows.size(); ++r) {
        const int v = rows[r];
        const auto& row = model.weights[v];
        const Vec3& p = model.mesh.vertices[v];
        const TwistBlend b = blend_twists(cache, row);
        const Vec3 v1 = dq_apply_blended(b.c0, b.ce, p);
        const Vec3 result = swing_stage(cache, row, v1);
        out.positions[r] = result;
        auto J = out.jacobian.middleRows(3 * r, 3);

        // d result / d v1
        double wsum = 0.0;
        Mat3 M = Mat3::Zero();
        for (const SkinInfluence& inf : row) {
            M += inf.weight * cache.joints[inf.joint].swing_rotation;
            wsum += inf.weight;
        }
        M += (1.0 - wsum) * Mat3::Identity();

        for (const SkinInfluence& inf : row) {
            const JointCache& c = cache.joints[inf.joint];
            const Vec3 sj = c.swing_rotation * (v1 - c.rest) + c.position;
            const double w = inf.weight;
            J.block<3, 3>(0, 0) += w * Mat3::Identity();
            J.block<3, 3>(0, 3) += -w * skew(sj - root_t);
            for (int k = inf.joint; k >= 0; k = skel.joints[k].parent) {
                const int o = params.offset_of(k);
                if (o < 0) continue;
                const Vec3 lever = sj - cache.joints[k].position;
                J.col(o) += w * omega[k][0].cross(lever);
                J.col(o + 1) += w * omega[k][1].cross(lever);
                if (k != inf.joint) J.col(o + 2) += w * omega[k][2].cross(lever);
            }
        }
        // Twist blending stage.
        for (std::size_t i = 0; i < row.size(); ++i) {
            const int k = row[i].joint;
            const int o = params.offset_of(k);
            if (o < 0) continue;
            const double sw = b.sign[i] * row[i].weight;
            const Vec3 dv1 = dq_apply_blended_derivative(b.c0, b.ce, twist_derivative[k].real * sw,
                                                         twist_derivative[k].dual * sw, p);
            J.col(o + 2) += M * dv1;
        }
    }
    return out;
}

SkinLinearization skin_linearization(const SkinnedModel& model, const SwingTwistPose& pose) {
    const Skeleton& skel = model.skeleton;
    const PoseCache cache = make_cache(skel, pose);
    const std::size_t nv = model.mesh.vertices.size();
    SkinLinearization out;
    out.vertex_jacobian.resize(nv);
    out.offset_jacobian.resize(nv);
    out.positions.resize(nv);

    // Rotation that carries a rest-offset change of joint k into posed space.
    std::vector<Mat3> offset_rot(skel.size());
    for (std::size_t k = 0; k < skel.size(); ++k) {
        const int par = skel.joints[k].parent;
        offset_rot[k] = par < 0 ? pose.root_rotation.toRotationMatrix() : cache.joints[par].rotation;
    }

    for (std::size_t v = 0; v < nv; ++v) {
        const auto& row = model.weights[v];
        const Vec3& p = model.mesh.vertices[v];
        const TwistBlend b = blend_twists(cache, row);
        const Vec3 v1 = dq_apply_blended(b.c0, b.ce, p);
        out.positions[v] = swing_stage(cache, row, v1);

        double wsum = 0.0;
        Mat3 M = Mat3::Zero();
        for (const SkinInfluence& inf : row) {
            M += inf.weight * cache.joints[inf.joint].swing_rotation;
            wsum += inf.weight;
        }
        M += (1.0 - wsum) * Mat3::Identity();

        // Blended rotation: q x q* / |q|^2 as a matrix.
        const double n = b.c0.dot(b.c0);
        const Mat3 U = skew(b.c0.v);
        const Mat3 R1 = Mat3::Identity() + (2.0 / n) * (U * U + b.c0.w * U);
        out.vertex_jacobian[v] = M * R1;

        // Rest offset of joint k moves the rest and posed position of every
        // joint in its subtree.
        std::vector<std::pair<int, Mat3>> blocks;
        auto block_for = [&](int k) -> Mat3& {
            for (auto& [j, m] : blocks)
                if (j == k) return m;
            blocks.emplace_back(k, Mat3::Zero());
            return blocks.back().second;
        };
        for (std::size_t i = 0; i < row.size(); ++i) {
            const int j = row[i].joint;
            const JointCache& c = cache.joints[j];
            const double w = row[i].weight;
            // d ce / d offset (per basis direction), through t_j = rest - R_tau rest.
            const Mat3 dt = Mat3::Identity() - c.twist_matrix;
            Mat3 dv1 = Mat3::Zero();
            for (int axis = 0; axis < 3; ++axis) {
                const QuatV dce = (QuatV{0.0, dt.col(axis)} * c.twist.real) * (0.5 * b.sign[i] * w);
                dv1.col(axis) = dq_apply_blended_derivative(b.c0, b.ce, QuatV{0.0, Vec3::Zero()}, dce, p);
            }
            for (int k = j; k >= 0; k = skel.joints[k].parent) {
                Mat3& blk = block_for(k);
                blk += M * dv1 + w * (offset_rot[k] - c.swing_rotation);
            }
        }
        out.offset_jacobian[v] = std::move(blocks);
    }
    return out;
}

bool clamp_to_limits(const Skeleton& skeleton, SwingTwistPose& pose) {
    bool changed = false;
    for (std::size_t j = 0; j < skeleton.size() && j < pose.joints.size(); ++j) {
        JointAngles& a = pose.joints[j];
        Vec3 x = a.as_vector();
        const Vec3 before = x;
        if (skeleton.joints[j].limits) x = x.cwiseMax(skeleton.joints[j].limits->lower).cwiseMin(skeleton.joints[j].limits->upper);
        const double sn = x.head<2>().norm();
        constexpr double kMaxSwing = M_PI - 1e-6;
        if (sn > kMaxSwing) x.head<2>() *= kMaxSwing / sn;
        if (x != before) {
            a = JointAngles::from_vector(x);
            changed = true;
        }
    }
    return changed;
}

bool within_limits(const Skeleton& skeleton, const SwingTwistPose& pose, double tol) {
    for (std::size_t j = 0; j < skeleton.size(); ++j) {
        const Vec3 x = pose.joints[j].as_vector();
        if (x.head<2>().norm() >= M_PI) return false;
        if (!skeleton.joints[j].limits) continue;
        if (((x - skeleton.joints[j].limits->lower).array() < -tol).any()) return false;
        if (((x - skeleton.joints[j].limits->upper).array() > tol).any()) return false;
    }
    return true;
}

Eigen::VectorXd pose_scalars(const SwingTwistPose& pose) {
    Eigen::VectorXd x(3 * pose.joints.size());
    for (std::size_t j = 0; j < pose.joints.size(); ++j) x.segment<3>(3 * j) = pose.joints[j].as_vector();
    return x;
}

}  // namespace vva
