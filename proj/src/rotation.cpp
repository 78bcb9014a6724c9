#include "vva/rotation.hpp"

#include <cmath>

namespace vva {

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

Quat quat_exp(const Vec3& rotvec) {
    const double theta = rotvec.norm();
    if (theta < 1e-12) {
        Quat q(1.0, 0.5 * rotvec.x(), 0.5 * rotvec.y(), 0.5 * rotvec.z());
        return q.normalized();
    }
    const Vec3 axis = rotvec / theta;
    const double s = std::sin(0.5 * theta);
    return Quat(std::cos(0.5 * theta), s * axis.x(), s * axis.y(), s * axis.z());
}

Vec3 quat_log(const Quat& qin) {
    Quat q = qin;
    if (q.w() < 0) q.coeffs() = -q.coeffs();
    const double vn = q.vec().norm();
    if (vn < 1e-15) return 2.0 * q.vec();
    const double angle = 2.0 * std::atan2(vn, q.w());
    return q.vec() * (angle / vn);
}

Mat3 so3_left_jacobian(const Vec3& phi) {
    const double theta = phi.norm();
    const Mat3 K = skew(phi);
    if (theta < 1e-6) return Mat3::Identity() + 0.5 * K + (1.0 / 6.0) * K * K;
    const double t2 = theta * theta;
    return Mat3::Identity() + ((1.0 - std::cos(theta)) / t2) * K + ((theta - std::sin(theta)) / (t2 * theta)) * K * K;
}

double geodesic_angle(const Quat& a, const Quat& b) {
    const Quat d = a.conjugate() * b;
    return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

double quat_distance(const Quat& a, const Quat& b) {
    return std::min((a.coeffs() - b.coeffs()).norm(), (a.coeffs() + b.coeffs()).norm());
}

std::pair<Vec3, Vec3> orthonormal_basis(const Vec3& axis) {
    const Vec3 a = axis.normalized();
    int least = 0;
    a.cwiseAbs().minCoeff(&least);
    const Vec3 helper = Vec3::Unit(least);
    const Vec3 b1 = a.cross(helper).normalized();
    const Vec3 b2 = a.cross(b1);
    // (b1, b2, a) right-handed: b1 x b2 = b1 x (a x b1) = a.
    return {b1, b2};
}

SwingTwistSplit swing_twist_decompose(const Quat& qin, const Vec3& axis) {
    Quat q = qin;
    if (q.w() < 0) q.coeffs() = -q.coeffs();
    SwingTwistSplit out;
    const double proj = q.vec().dot(axis);
    const double tn = std::hypot(q.w(), proj);
    if (tn < 1e-14) {
        out.swing = q;
        out.twist_angle = 0.0;
        out.degenerate = true;
        return out;
    }
    const Quat twist(q.w() / tn, axis.x() * proj / tn, axis.y() * proj / tn, axis.z() * proj / tn);
    double angle = 2.0 * std::atan2(proj, q.w());
    if (angle <= -M_PI) angle += 2.0 * M_PI;
    out.twist_angle = angle;
    out.swing = q * twist.conjugate();
    // Below rounding resolution the swing is the identity; snapping keeps pure
    // twists exact.
    if (out.swing.vec().norm() < 4.0 * std::numeric_limits<double>::epsilon()) out.swing = Quat::Identity();
    return out;
}

Quat compose_swing_twist(const Quat& swing, const Vec3& axis, double twist_angle) {
    return swing * Quat(Eigen::AngleAxisd(twist_angle, axis));
}

DualQuat DualQuat::from_rigid(const Quat& rotation, const Vec3& translation) {
    DualQuat dq;
    dq.real = QuatV::from(rotation);
    dq.dual = (QuatV{0.0, translation} * dq.real) * 0.5;
    return dq;
}

DualQuat DualQuat::rotation_about(const Vec3& axis, double angle, const Vec3& pivot) {
    const Quat r(Eigen::AngleAxisd(angle, axis));
    return from_rigid(r, pivot - r * pivot);
}

namespace {

// K in p' = p + (2/N) K.
Vec3 blend_numerator(const QuatV& c0, const QuatV& ce, const Vec3& p) {
    const double s = c0.w, se = ce.w;
    const Vec3& u = c0.v;
    const Vec3& ue = ce.v;
    return u.cross(u.cross(p) + s * p) + s * ue - se * u + u.cross(ue);
}

}  // namespace

Vec3 dq_apply_blended(const QuatV& c0, const QuatV& ce, const Vec3& p) {
    const double n = c0.dot(c0);
    return p + (2.0 / n) * blend_numerator(c0, ce, p);
}

Vec3 dq_apply_blended_derivative(const QuatV& c0, const QuatV& ce, const QuatV& dc0, const QuatV& dce, const Vec3& p) {
    const double s = c0.w, se = ce.w, ds = dc0.w, dse = dce.w;
    const Vec3& u = c0.v;
    const Vec3& ue = ce.v;
    const Vec3& du = dc0.v;
    const Vec3& due = dce.v;
    const double n = c0.dot(c0);
    const double dn = 2.0 * c0.dot(dc0);
    const Vec3 k = blend_numerator(c0, ce, p);
    const Vec3 dk = du.cross(u.cross(p) + s * p) + u.cross(du.cross(p) + ds * p) + ds * ue + s * due - dse * u -
                    se * du + du.cross(ue) + u.cross(due);
    return (2.0 / n) * dk - (2.0 * dn / (n * n)) * k;
}

}  // namespace vva
