#pragma once

#include "vva/common.hpp"

namespace vva {

Mat3 skew(const Vec3& v);

/// Rotation vector -> unit quaternion and back (angle in [0, pi]).
Quat quat_exp(const Vec3& rotvec);
Vec3 quat_log(const Quat& q);

/// Left Jacobian of the SO(3) exponential: d/dt exp(phi(t)) = [J_l(phi) phi']x exp(phi).
Mat3 so3_left_jacobian(const Vec3& phi);

/// Rotation angle between a and b in [0, pi].
double geodesic_angle(const Quat& a, const Quat& b);

/// Euclidean distance between unit quaternions modulo the double cover.
double quat_distance(const Quat& a, const Quat& b);

/// Two unit vectors orthogonal to `axis` and to each other, chosen
/// deterministically; (b1, b2, axis) is right-handed.
std::pair<Vec3, Vec3> orthonormal_basis(const Vec3& axis);

struct SwingTwistSplit {
    Quat swing = Quat::Identity();
    double twist_angle = 0.0;  // (-pi, pi]
    bool degenerate = false;   // twist undefined (180 degree swing); angle reported as 0
};

/// q = swing * twist(axis, twist_angle), the swing having no component about
/// `axis`. Pure twists return an exactly-identity swing.
SwingTwistSplit swing_twist_decompose(const Quat& q, const Vec3& axis);
Quat compose_swing_twist(const Quat& swing, const Vec3& axis, double twist_angle);

/// Minimal quaternion algebra used by dual-quaternion blending. Unlike
/// Eigen::Quaterniond it supports addition and scaling.
struct QuatV {
    double w = 1.0;
    Vec3 v = Vec3::Zero();

    static QuatV from(const Quat& q) { return {q.w(), q.vec()}; }
    QuatV operator*(const QuatV& o) const { return {w * o.w - v.dot(o.v), w * o.v + o.w * v + v.cross(o.v)}; }
    QuatV operator+(const QuatV& o) const { return {w + o.w, v + o.v}; }
    QuatV operator*(double s) const { return {w * s, v * s}; }
    double dot(const QuatV& o) const { return w * o.w + v.dot(o.v); }
};

/// Rigid motion as a dual quaternion (real = rotation, dual = 0.5 * t * real).
struct DualQuat {
    QuatV real;
    QuatV dual{0.0, Vec3::Zero()};

    static DualQuat from_rigid(const Quat& rotation, const Vec3& translation);
    /// Rotation about an axis line through `pivot`.
    static DualQuat rotation_about(const Vec3& axis, double angle, const Vec3& pivot);
};

/// Applies an unnormalized dual quaternion (a weighted blend) to a point,
/// normalizing implicitly. Written in displacement form so the identity maps
/// points exactly.
Vec3 dq_apply_blended(const QuatV& c0, const QuatV& ce, const Vec3& p);

/// Derivative of dq_apply_blended with respect to a change (dc0, dce).
Vec3 dq_apply_blended_derivative(const QuatV& c0, const QuatV& ce, const QuatV& dc0, const QuatV& dce, const Vec3& p);

}  // namespace vva
