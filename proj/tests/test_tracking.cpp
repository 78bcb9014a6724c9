#include "test_util.hpp"
#include "vva/decimate.hpp"
#include "vva/geometry.hpp"
#include "vva/synthetic.hpp"
#include "vva/tracking.hpp"

using namespace vva;

namespace {

// Posed human frames, each re-meshed by a different decimation so that no
// two frames share connectivity.
MeshSequence articulated_sequence(int frames, double degrees) {
    const SkinnedModel model = make_human_model(2);
    const auto poses = demo_trajectory(model.skeleton, frames, degrees);
    MeshSequence seq;
    for (int f = 0; f < frames; ++f) {
        DecimationParams p;
        p.target_faces = model.mesh.faces.size() - 40 - 10 * f;
        seq.frames.push_back(decimate(skin(model, poses[f]), p).mesh);
    }
    return seq;
}

}  // namespace

TEST_CASE("keyframe policy parsing") {
    const KeyframePolicy a = KeyframePolicy::parse("every_nth:10");
    CHECK(a.mode == KeyframePolicy::Mode::EveryNth);
    CHECK(a.n == 10);
    CHECK(a.to_string() == "every_nth:10");
    CHECK(KeyframePolicy::parse("scored:4").mode == KeyframePolicy::Mode::Scored);
    CHECK_THROWS_AS(KeyframePolicy::parse("every_nth"), InvalidArgument);
    CHECK_THROWS_AS(KeyframePolicy::parse("sometimes:3"), InvalidArgument);
    CHECK_THROWS_AS(KeyframePolicy::parse("every_nth:0"), InvalidArgument);
    CHECK_THROWS_AS(KeyframePolicy::parse("every_nth:3x"), InvalidArgument);
}

TEST_CASE("voronoi grouping with ties to the earlier keyframe") {
    const auto g = group_by_keyframes({0, 10}, 20);
    REQUIRE(g.size() == 2);
    CHECK(g[0].first == 0);
    CHECK(g[0].last == 5);
    CHECK(g[1].first == 6);
    CHECK(g[1].last == 19);
    const auto h = group_by_keyframes({2, 5, 9}, 12);
    CHECK(h[0].last == 3);
    CHECK(h[1].first == 4);
    CHECK(h[1].last == 7);
    CHECK(h[2].first == 8);
    validate_groups(h, 12);

    const std::vector<double> areas(20, 1.0);
    const std::vector<int> genus(20, 0);
    const auto every = select_keyframes(areas, genus, KeyframePolicy::parse("every_nth:10"));
    CHECK(every.size() == 2);
    CHECK(every[1].keyframe == 10);
}

TEST_CASE("scored selection equals a direct evaluation") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> area(1.0, 2.0);
    std::uniform_int_distribution<int> gen(0, 2);
    std::vector<double> areas(23);
    std::vector<int> genus(23);
    for (int i = 0; i < 23; ++i) {
        areas[i] = area(rng);
        genus[i] = gen(rng);
    }
    KeyframePolicy p = KeyframePolicy::parse("scored:6");
    p.w_area = 0.7;
    p.w_genus = 1.3;
    const auto groups = select_keyframes(areas, genus, p);
    REQUIRE(groups.size() == 4);
    for (int w = 0; w < 4; ++w) {
        const int s = 6 * w, e = std::min(23, s + 6);
        double mean = 0, var = 0;
        for (int i = s; i < e; ++i) mean += areas[i] / (e - s);
        for (int i = s; i < e; ++i) var += (areas[i] - mean) * (areas[i] - mean) / (e - s);
        int best = s;
        double best_score = -1e300;
        for (int i = s; i < e; ++i) {
            const double score = p.w_area * (areas[i] - mean) / std::sqrt(var) - p.w_genus * genus[i];
            if (score > best_score + 1e-12) {
                best_score = score;
                best = i;
            }
        }
        CHECK(groups[w].keyframe == static_cast<std::size_t>(best));
    }
}

TEST_CASE("scoring genus counts flagged components as one") {
    TriMesh m = make_torus(1.0, 0.3, 16, 8);
    CHECK(scoring_genus(m) == 1);
    const TriMesh g = make_grid(2, 2);
    const int off = static_cast<int>(m.vertices.size());
    for (const Vec3& v : g.vertices) m.vertices.push_back(v + Vec3(5, 0, 0));
    for (const Face& f : g.faces) m.faces.push_back({f[0] + off, f[1] + off, f[2] + off});
    CHECK(scoring_genus(m) == 2);
}

TEST_CASE("static sequence tracks exactly") {
    MeshSequence seq;
    const TriMesh body = make_human_body(2);
    for (int i = 0; i < 6; ++i) seq.frames.push_back(body);
    const TrackedSequence t = track_sequence(seq, KeyframePolicy::parse("every_nth:3"), {}, 1);
    REQUIRE(t.frames.size() == 6);
    for (const auto& f : t.frames) {
        CHECK(f.error < 1e-9);
        CHECK(test::max_vertex_distance(f.mesh, body) < 1e-9);
    }
}

TEST_CASE("articulated tracking with overlap") {
    const MeshSequence seq = articulated_sequence(8, 12.0);
    const TrackedSequence t = track_sequence(seq, KeyframePolicy::parse("every_nth:4"), {}, 2);
    REQUIRE(t.frames.size() == 8);
    REQUIRE(t.groups.size() == 2);
    for (std::size_t f = 0; f < 8; ++f) {
        const TrackedFrame& tf = t.frames[f];
        CHECK(tf.frame == f);
        CHECK(tf.mesh.faces == seq.frames[tf.keyframe].faces);
        CHECK(tf.error < 2e-3);
    }
    // Groups 0..2 and 3..7 widened by two frames overlap on 1..4.
    CHECK(t.merges.size() == 4);
    for (const MergeDecision& m : t.merges) {
        for (const auto& [key, err] : m.rejected) CHECK(m.chosen_error <= err);
        CHECK(t.frames[m.frame].keyframe == m.chosen_keyframe);
    }
    std::size_t members = 0;
    for (const TrackedGroup& g : t.groups) {
        CHECK(std::is_sorted(g.members.begin(), g.members.end()));
        members += g.members.size();
    }
    CHECK(members == 8);
}

TEST_CASE("transition interpolation endpoints") {
    const TriMesh a = make_icosphere(2);
    TriMesh b = a;
    for (auto& v : b.vertices) v *= 1.1;
    const auto w = interpolate_meshes(a, b, 5);
    REQUIRE(w.size() == 5);
    CHECK(test::bit_identical(w.front(), a));
    CHECK(test::max_vertex_distance(w.back(), b) < 1e-15);
    CHECK(test::max_vertex_distance(w[2], a) == doctest::Approx(0.05).epsilon(1e-9));
    const TriMesh moved = transformed(a, Eigen::AngleAxisd(0.1, Vec3::UnitZ()).toRotationMatrix(), Vec3(0.02, 0, 0));
    const auto s = smooth_transition(a, moved, 4, {});
    REQUIRE(s.size() == 4);
    CHECK(test::bit_identical(s.front(), a));
    CHECK(s.back().faces == a.faces);
    CHECK(registration_error(s.back(), moved) < 1e-6);
}

TEST_CASE("track_group argument checks") {
    MeshSequence seq;
    seq.frames.assign(3, make_icosphere(1));
    CHECK_THROWS_AS(track_group(seq, 5, 0, 2, {}), InvalidArgument);
    CHECK_THROWS_AS(track_group(seq, 1, 2, 2, {}), InvalidArgument);
}
