#include "test_util.hpp"
#include "vva/geometry.hpp"
#include "vva/kernels.hpp"
#include "vva/spatial_index.hpp"
#include "vva/synthetic.hpp"

using namespace vva;

namespace {

// Brute-force scan, exact ties to the lowest face id.
SurfacePoint brute_closest(const TriMesh& m, const Vec3& p) {
    SurfacePoint best;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
        const Face& t = m.faces[f];
        Vec3 q, bary;
        const double d = closest_point_sq(p, m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]], q, bary);
        if (d < best_sq) {
            best_sq = d;
            best.face = static_cast<int>(f);
            best.point = q;
            best.bary = bary;
        }
    }
    best.distance = std::sqrt(best_sq);
    return best;
}

TriMesh bumpy_torus() {
    TriMesh m = make_torus(0.5, 0.2, 40, 20);
    std::mt19937_64 rng(5);
    for (auto& v : m.vertices) v += test::random_vec(rng, 0.01);
    return m;
}

}  // namespace

TEST_CASE("closest point equals brute force") {
    const TriMesh m = bumpy_torus();
    const SpatialIndex index(m);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 p = test::random_vec(rng, 1.0);
        const SurfacePoint a = index.closest_point(p);
        const SurfacePoint b = brute_closest(m, p);
        CHECK(a.face == b.face);
        CHECK(a.distance == b.distance);
        CHECK(a.point == b.point);
    }
}

TEST_CASE("ties go to the lowest face id") {
    // Point above a shared vertex of a flat grid: every incident face is at
    // the same distance.
    const TriMesh g = make_grid(4, 4);
    const SpatialIndex index(g);
    for (std::size_t v = 0; v < g.vertices.size(); ++v) {
        const Vec3 p = g.vertices[v] + Vec3(0, 0, 0.3);
        CHECK(index.closest_point(p).face == brute_closest(g, p).face);
    }
}

TEST_CASE("gated and hinted queries") {
    const TriMesh m = bumpy_torus();
    const SpatialIndex index(m);
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> face(0, static_cast<int>(m.faces.size()) - 1);
    for (int i = 0; i < 500; ++i) {
        const Vec3 p = test::random_vec(rng, 1.0);
        const SurfacePoint ref = brute_closest(m, p);
        const auto within = index.closest_point_within(p, 0.1);
        CHECK(within.has_value() == (ref.distance <= 0.1));
        if (within) CHECK(within->face == ref.face);
        const SurfacePoint hinted = index.closest_point_hinted(p, face(rng));
        CHECK(hinted.face == ref.face);
        CHECK(hinted.distance == ref.distance);
    }
    CHECK_THROWS_AS(SpatialIndex(TriMesh{}).closest_point(Vec3::Zero()), InvalidArgument);
}

TEST_CASE("k nearest points equal brute force") {
    std::mt19937_64 rng(4);
    std::vector<Vec3> pts;
    for (int i = 0; i < 500; ++i) pts.push_back(test::random_vec(rng));
    pts.push_back(pts[10]);  // exact duplicate
    const PointIndex index(pts);
    for (int q = 0; q < 200; ++q) {
        const Vec3 p = q == 0 ? pts[10] : test::random_vec(rng);
        std::vector<std::pair<double, int>> all;
        for (std::size_t i = 0; i < pts.size(); ++i) all.emplace_back((pts[i] - p).norm(), static_cast<int>(i));
        std::sort(all.begin(), all.end());
        const auto knn = index.k_nearest(p, 7);
        REQUIRE(knn.size() == 7);
        for (int k = 0; k < 7; ++k) {
            CHECK(knn[k].first == all[k].second);
            CHECK(knn[k].second == doctest::Approx(all[k].first).epsilon(1e-12));
        }
        CHECK(index.nearest(p) == all[0].second);
    }
}

TEST_CASE("parallel closest-point kernels match serial bit for bit") {
    const TriMesh m = make_icosphere(4);
    const SpatialIndex index(m);
    std::mt19937_64 rng(8);
    std::vector<Vec3> q;
    std::vector<int> hints;
    for (int i = 0; i < 5000; ++i) {
        q.push_back(test::random_vec(rng, 1.5));
        hints.push_back(i % 3 == 0 ? -1 : i % static_cast<int>(m.faces.size()));
    }
    const auto a = closest_points(index, q, hints);
    const auto b = closest_points_serial(index, q, hints);
    REQUIRE(a.size() == b.size());
    bool same = true;
    for (std::size_t i = 0; i < a.size(); ++i)
        same = same && a[i].face == b[i].face && a[i].point == b[i].point && a[i].distance == b[i].distance;
    CHECK(same);
    const auto ga = closest_points_within(index, q, 0.2);
    const auto gb = closest_points_within_serial(index, q, 0.2);
    for (std::size_t i = 0; i < ga.size(); ++i) {
        REQUIRE(ga[i].has_value() == gb[i].has_value());
        if (ga[i]) CHECK(ga[i]->face == gb[i]->face);
    }
    double ref = 0.0;
    for (const auto& s : b) ref += s.distance * s.distance;
    CHECK(sum_squared_distances(index, q) == doctest::Approx(ref).epsilon(1e-12));
}
