#pragma once

#include "vva/body_model.hpp"
#include "vva/mesh.hpp"

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

namespace vva::test {

inline Quat random_quat(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Quat q(n(rng), n(rng), n(rng), n(rng));
    return q.normalized();
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    return {u(rng), u(rng), u(rng)};
}

inline double max_vertex_distance(const TriMesh& a, const TriMesh& b) {
    REQUIRE(a.vertices.size() == b.vertices.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.vertices.size(); ++i) m = std::max(m, (a.vertices[i] - b.vertices[i]).norm());
    return m;
}

inline bool bit_identical(const TriMesh& a, const TriMesh& b) {
    if (a.vertices.size() != b.vertices.size() || a.faces != b.faces) return false;
    for (std::size_t i = 0; i < a.vertices.size(); ++i)
        if (std::memcmp(a.vertices[i].data(), b.vertices[i].data(), sizeof(double) * 3) != 0) return false;
    return true;
}

// Random pose with every angle uniform in [-deg, deg] degrees.
inline SwingTwistPose random_pose(const Skeleton& sk, std::mt19937_64& rng, double deg) {
    std::uniform_real_distribution<double> u(-deg * M_PI / 180.0, deg * M_PI / 180.0);
    SwingTwistPose p = SwingTwistPose::zero(sk.size());
    for (std::size_t j = 1; j < sk.size(); ++j) p.joints[j] = JointAngles::from_vector({u(rng), u(rng), u(rng)});
    return p;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::path(VVA_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace vva::test
