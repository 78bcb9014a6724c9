#include "test_util.hpp"
#include "vva/rotation.hpp"

using namespace vva;

TEST_CASE("swing-twist round trip") {
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Quat q = test::random_quat(rng);
        const Vec3 axis = test::random_vec(rng).normalized();
        const SwingTwistSplit s = swing_twist_decompose(q, axis);
        const Quat back = compose_swing_twist(s.swing, axis, s.twist_angle);
        worst = std::max(worst, quat_distance(back, q));
        // The swing has no component about the axis.
        CHECK(std::abs(s.swing.vec().dot(axis)) < 1e-12);
        CHECK(s.twist_angle > -M_PI);
        CHECK(s.twist_angle <= M_PI);
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("pure twist has an exactly identity swing") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 axis = test::random_vec(rng).normalized();
        const double angle = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
        const SwingTwistSplit s = swing_twist_decompose(Quat(Eigen::AngleAxisd(angle, axis)), axis);
        CHECK(s.swing.w() == 1.0);
        CHECK(s.swing.vec() == Vec3::Zero());
        CHECK(s.twist_angle == doctest::Approx(angle).epsilon(1e-12));
    }
}

TEST_CASE("180 degree swing is degenerate") {
    const Quat q(Eigen::AngleAxisd(M_PI, Vec3::UnitX()));
    const SwingTwistSplit s = swing_twist_decompose(q, Vec3::UnitY());
    CHECK(s.degenerate);
    CHECK(s.twist_angle == 0.0);
    CHECK(quat_distance(compose_swing_twist(s.swing, Vec3::UnitY(), 0.0), q) < 1e-12);
}

TEST_CASE("exp and log") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        Vec3 r = test::random_vec(rng, 1.7);
        const Quat q = quat_exp(r);
        CHECK(std::abs(q.norm() - 1.0) < 1e-14);
        CHECK((quat_log(q) - r).norm() < 1e-12);
        CHECK(geodesic_angle(Quat::Identity(), q) == doctest::Approx(r.norm()).epsilon(1e-12));
    }
    CHECK(quat_log(Quat::Identity()) == Vec3::Zero());
}

TEST_CASE("left jacobian matches finite differences") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
        const Vec3 phi = test::random_vec(rng, 1.5);
        const Vec3 dphi = test::random_vec(rng).normalized();
        const double h = 1e-6;
        const Quat a = quat_exp(phi + h * dphi), b = quat_exp(phi - h * dphi);
        // exp(phi + h dphi) exp(phi)^-1 ~ exp(h J dphi)
        const Vec3 fd = (quat_log(a * quat_exp(phi).conjugate()) - quat_log(b * quat_exp(phi).conjugate())) / (2 * h);
        CHECK((fd - so3_left_jacobian(phi) * dphi).norm() < 1e-7);
    }
    const Vec3 tiny(1e-8, -2e-8, 3e-9);
    CHECK((so3_left_jacobian(tiny) - Mat3::Identity()).norm() < 1e-7);
}

TEST_CASE("orthonormal basis is right handed") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const Vec3 a = test::random_vec(rng).normalized();
        const auto [b1, b2] = orthonormal_basis(a);
        CHECK(std::abs(b1.dot(a)) < 1e-14);
        CHECK(std::abs(b2.dot(a)) < 1e-14);
        CHECK(std::abs(b1.dot(b2)) < 1e-14);
        CHECK((b1.cross(b2) - a).norm() < 1e-14);
    }
}

TEST_CASE("dual quaternion rigid motion and blend derivative") {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 50; ++i) {
        const Quat r = test::random_quat(rng);
        const Vec3 t = test::random_vec(rng);
        const Vec3 p = test::random_vec(rng);
        const DualQuat dq = DualQuat::from_rigid(r, t);
        CHECK((dq_apply_blended(dq.real, dq.dual, p) - (r * p + t)).norm() < 1e-13);
        // Scaling a dual quaternion does not change its action.
        CHECK((dq_apply_blended(dq.real * 2.5, dq.dual * 2.5, p) - (r * p + t)).norm() < 1e-13);

        const QuatV dc0{0.3, test::random_vec(rng)}, dce{-0.1, test::random_vec(rng)};
        const double h = 1e-6;
        const Vec3 fd = (dq_apply_blended(dq.real + dc0 * h, dq.dual + dce * h, p) -
                         dq_apply_blended(dq.real + dc0 * -h, dq.dual + dce * -h, p)) /
                        (2 * h);
        const Vec3 an = dq_apply_blended_derivative(dq.real, dq.dual, dc0, dce, p);
        CHECK((fd - an).norm() < 1e-7 * std::max(1.0, an.norm()));
    }
    const Vec3 p(0.3, -2, 7);
    const DualQuat id = DualQuat::from_rigid(Quat::Identity(), Vec3::Zero());
    CHECK(dq_apply_blended(id.real, id.dual, p) == p);
    const DualQuat about = DualQuat::rotation_about(Vec3::UnitZ(), M_PI / 2, Vec3(1, 0, 0));
    CHECK((dq_apply_blended(about.real, about.dual, Vec3(2, 0, 0)) - Vec3(1, 1, 0)).norm() < 1e-14);
}
