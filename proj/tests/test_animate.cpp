#include "test_util.hpp"
#include "vva/animate.hpp"
#include "vva/synthetic.hpp"

using namespace vva;

namespace {

const SkinnedModel& human() {
    static const SkinnedModel m = make_human_model(1);
    return m;
}

int joint_index(const Skeleton& sk, const std::string& name) {
    for (std::size_t j = 0; j < sk.size(); ++j)
        if (sk.joints[j].name == name) return static_cast<int>(j);
    return -1;
}

double joint_weight(const SkinnedModel& m, int v, int joint) {
    double w = 0.0;
    for (const SkinInfluence& inf : m.weights[v])
        if (inf.joint == joint) w += inf.weight;
    return w;
}

TriMesh offset_along_normals(const TriMesh& m, double h) {
    TriMesh out = m;
    const auto n = vertex_normals(m);
    for (std::size_t v = 0; v < n.size(); ++v) out.vertices[v] += h * n[v];
    return out;
}

// Three groups of five frames. C starts exactly where A ends; B continues
// A's motion.
struct Library {
    std::vector<SwingTwistPose> poses;
    TrackedSequence tracked;
    std::map<std::size_t, GlueMap> glues;
    std::vector<TriMesh> frames;
};

Library make_library() {
    const SkinnedModel& m = human();
    Library lib;
    const auto traj = demo_trajectory(m.skeleton, 20, 30.0);
    for (int f = 0; f < 10; ++f) lib.poses.push_back(traj[f]);
    for (int f = 0; f < 5; ++f) lib.poses.push_back(traj[4 - f]);
    for (std::size_t f = 0; f < lib.poses.size(); ++f) {
        // A clothed look: the skinned body pushed out by 5 mm.
        lib.frames.push_back(offset_along_normals(skin(m, lib.poses[f]), 0.005));
        lib.glues[f] = build_glue_map(lib.frames[f], skin(m, lib.poses[f]));
    }
    for (std::size_t g = 0; g < 3; ++g) {
        TrackedGroup tg;
        tg.keyframe = 5 * g;
        for (std::size_t i = 0; i < 5; ++i) tg.members.push_back(5 * g + i);
        lib.tracked.groups.push_back(tg);
    }
    return lib;
}

std::vector<SwingTwistPose> slice(const std::vector<SwingTwistPose>& p, std::size_t a, std::size_t n) {
    return {p.begin() + a, p.begin() + a + n};
}

}  // namespace

TEST_CASE("glue to the template itself") {
    const SkinnedModel& m = human();
    const SwingTwistPose pose = demo_trajectory(m.skeleton, 5, 20.0)[2];
    const TriMesh fitted = skin(m, pose);
    const GlueMap g = build_glue_map(fitted, fitted);
    CHECK(g.template_faces == fitted.faces.size());
    CHECK(g.outliers.empty());
    for (const GlueEntry& e : g.entries) {
        CHECK(std::abs(e.offset) < 1e-12);
        CHECK(std::abs(e.bary.sum() - 1.0) < 1e-9);
    }
    CHECK(test::max_vertex_distance(reconstruct(g, fitted), fitted) < 1e-9);
}

TEST_CASE("constant offset frames") {
    const SkinnedModel m = make_human_model(3);
    const TriMesh fitted = skin(m, SwingTwistPose::zero(m.skeleton.size()));
    const TriMesh frame = offset_along_normals(fitted, 0.002);
    const GlueMap g = build_glue_map(frame, fitted);
    // Offsetting along vertex normals only approximates a constant distance
    // where the surface curves, so the bound is on the typical vertex.
    std::vector<double> err;
    for (const GlueEntry& e : g.entries) {
        CHECK(e.offset <= 0.002 + 1e-12);
        err.push_back(std::abs(e.offset - 0.002));
    }
    std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
    CHECK(err[err.size() / 2] < 1e-4);
    CHECK(test::max_vertex_distance(reconstruct(g, fitted), frame) < 1e-6);
}

TEST_CASE("reconstruction formula") {
    TriMesh tri;
    tri.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}};
    tri.faces = {{0, 1, 2}};
    GlueMap g;
    g.entries = {{0, Vec3(0.2, 0.3, 0.5), 0.25}, {0, Vec3(-0.1, 0.6, 0.5), -1.0}};
    g.faces = {};
    g.template_faces = 1;
    const TriMesh r = reconstruct(g, tri);
    CHECK(r.vertices[0] == Vec3(0.6, 0.5, 0.25));
    CHECK((r.vertices[1] - Vec3(1.2, 0.5, -1.0)).norm() < 1e-15);
    g.entries[1].face = 3;
    CHECK_THROWS_AS(reconstruct(g, tri), InvalidArgument);
}

TEST_CASE("far vertices are outliers with a warning") {
    const SkinnedModel& m = human();
    const TriMesh fitted = skin(m, SwingTwistPose::zero(m.skeleton.size()));
    TriMesh frame = fitted;
    frame.vertices[3] += Vec3(0, 0, 1.0);
    Warnings w;
    const GlueMap g = build_glue_map(frame, fitted, &w);
    CHECK(g.outliers == std::vector<int>{3});
    CHECK(w.size() == 1);
    CHECK(test::max_vertex_distance(reconstruct(g, fitted), frame) < 1e-9);
}

TEST_CASE("retarget identity and rigid equivariance") {
    const SkinnedModel& m = human();
    const SwingTwistPose src = demo_trajectory(m.skeleton, 5, 20.0)[3];
    const TriMesh frame = offset_along_normals(skin(m, src), 0.004);
    const GlueMap g = build_glue_map(frame, skin(m, src));
    CHECK(test::max_vertex_distance(retarget(g, m, src), frame) < 1e-6);

    std::mt19937_64 rng(1);
    for (int i = 0; i < 5; ++i) {
        const Quat r = test::random_quat(rng);
        const Vec3 t = test::random_vec(rng);
        SwingTwistPose moved = src;
        moved.root_rotation = r * src.root_rotation;
        moved.root_translation = r * src.root_translation + t;
        const TriMesh out = retarget(g, m, moved);
        double worst = 0.0;
        for (std::size_t v = 0; v < frame.vertices.size(); ++v)
            worst = std::max(worst, (out.vertices[v] - (r * frame.vertices[v] + t)).norm());
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("raising an arm moves arm-glued vertices rigidly and leaves the torso") {
    const SkinnedModel& m = human();
    const int shoulder = joint_index(m.skeleton, "l_shoulder");
    const int elbow = joint_index(m.skeleton, "l_elbow");
    const int spine = joint_index(m.skeleton, "spine");
    const SwingTwistPose src = SwingTwistPose::zero(m.skeleton.size());
    const TriMesh frame = offset_along_normals(skin(m, src), 0.005);
    const GlueMap g = build_glue_map(frame, skin(m, src));

    SwingTwistPose raised = src;
    raised.joints[shoulder].swing = Vec2(20.0 * M_PI / 180.0, 0.0);
    const TriMesh out = retarget(g, m, raised);
    const auto fk0 = forward_kinematics(m.skeleton, src);
    const auto fk1 = forward_kinematics(m.skeleton, raised);
    const Quat dr = fk1[elbow].rotation * fk0[elbow].rotation.conjugate();

    int arm = 0, torso = 0;
    for (std::size_t v = 0; v < frame.vertices.size(); ++v) {
        const Face& f = m.mesh.faces[g.entries[v].face];
        bool on_arm = true, on_torso = true;
        for (int c : f) {
            on_arm = on_arm && joint_weight(m, c, elbow) + joint_weight(m, c, shoulder) >= 0.99;
            on_torso = on_torso && joint_weight(m, c, spine) > 0.0 && joint_weight(m, c, shoulder) == 0.0 &&
                       joint_weight(m, c, elbow) == 0.0;
        }
        const Vec3 moved = out.vertices[v];
        if (on_arm) {
            ++arm;
            const Vec3 expected = fk1[elbow].position + dr * (frame.vertices[v] - fk0[elbow].position);
            // Up to 1% of the weight may sit on joints that stay put.
            CHECK((moved - expected).norm() < 0.01 * (expected - frame.vertices[v]).norm() + 1e-9);
            CHECK((moved - frame.vertices[v]).norm() > 0.01);
        }
        if (on_torso) {
            ++torso;
            CHECK((moved - frame.vertices[v]).norm() < 1e-3);
        }
    }
    CHECK(arm > 10);
    CHECK(torso > 10);
}

TEST_CASE("pose distance") {
    const SkinnedModel& m = human();
    const Skeleton& sk = m.skeleton;
    const SwingTwistPose a = demo_trajectory(sk, 5, 20.0)[2];
    CHECK(pose_distance(sk, a, a) == 0.0);
    SwingTwistPose b = a;
    b.root_translation += Vec3(1, 2, 3);
    CHECK(pose_distance(sk, a, b) == 0.0);
    SwingTwistPose c = SwingTwistPose::zero(sk.size());
    SwingTwistPose d = c;
    d.joints[3].twist = M_PI / 6;
    CHECK(std::abs(pose_distance(sk, c, d) - M_PI / 6) < 1e-12);
    d = c;
    d.root_rotation = Quat(Eigen::AngleAxisd(0.25, Vec3::UnitY()));
    CHECK(std::abs(pose_distance(sk, c, d) - 0.25) < 1e-12);
    CHECK_THROWS_AS(pose_distance(sk, c, SwingTwistPose::zero(3)), InvalidArgument);

    std::mt19937_64 rng(2);
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
        SwingTwistPose p[3];
        for (auto& x : p) {
            x = test::random_pose(sk, rng, 60.0);
            x.root_rotation = test::random_quat(rng);
        }
        const double ab = pose_distance(sk, p[0], p[1]), ba = pose_distance(sk, p[1], p[0]);
        const double bc = pose_distance(sk, p[1], p[2]), ac = pose_distance(sk, p[0], p[2]);
        if (ab != ba) ++violations;
        if (ac > ab + bc + 1e-9) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("motion graph edges match a brute-force table") {
    const SkinnedModel& m = human();
    const Library lib = make_library();
    double table[3][3];
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) table[a][b] = pose_distance(m.skeleton, lib.poses[5 * a + 4], lib.poses[5 * b]);
    CHECK(table[0][2] == 0.0);

    for (double threshold : {0.0, 0.2, 1.0, 100.0}) {
        const MotionGraph g = build_motion_graph(lib.tracked, lib.poses, m.skeleton, threshold, 3);
        g.validate();
        REQUIRE(g.nodes.size() == 3);
        std::size_t expected = 0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                if (a != b && table[a][b] < threshold) ++expected;
        CHECK(g.edges.size() == expected);
        for (const MotionEdge& e : g.edges) {
            CHECK(e.cost == table[e.from][e.to]);
            CHECK(e.blend_window == 3);
        }
    }
    TrackedSequence single;
    single.groups = {lib.tracked.groups[0]};
    const MotionGraph one = build_motion_graph(single, lib.poses, m.skeleton, 100.0);
    CHECK(one.nodes.size() == 1);
    CHECK(one.edges.empty());
}

TEST_CASE("synthesis replays an existing subsequence") {
    const SkinnedModel& m = human();
    const Library lib = make_library();
    const MotionGraph g = build_motion_graph(lib.tracked, lib.poses, m.skeleton, 1.0, 3);
    for (bool exact : {false, true}) {
        SynthesisParams p;
        p.exact = exact;
        const SynthesisResult r = synthesize(g, m, lib.glues, slice(lib.poses, 5, 5), p);
        REQUIRE(r.meshes.size() == 5);
        REQUIRE(r.plan.entries.size() == 5);
        for (std::size_t t = 0; t < 5; ++t) {
            const PlanEntry& e = r.plan.entries[t];
            CHECK(e.frame == 5 + t);
            CHECK(e.pose_cost < 1e-9);
            CHECK(geodesic_angle(e.delta_root_rotation, Quat::Identity()) < 1e-9);
            CHECK(e.delta_root_translation.norm() < 1e-9);
            for (const Vec3& d : e.delta_angles) CHECK(d.norm() < 1e-9);
            CHECK(test::max_vertex_distance(r.meshes[t], lib.frames[5 + t]) < 1e-6);
        }
    }
}

TEST_CASE("a perturbed target pose changes only its own frame") {
    const SkinnedModel& m = human();
    const Library lib = make_library();
    const MotionGraph g = build_motion_graph(lib.tracked, lib.poses, m.skeleton, 1.0, 3);
    std::vector<SwingTwistPose> target = slice(lib.poses, 5, 5);
    const int elbow = joint_index(m.skeleton, "r_elbow");
    target[2].joints[elbow].swing.y() += 5.0 * M_PI / 180.0;
    SynthesisParams p;
    p.exact = true;
    const SynthesisResult r = synthesize(g, m, lib.glues, target, p);
    REQUIRE(r.meshes.size() == 5);
    for (std::size_t t = 0; t < 5; ++t) {
        CHECK(r.plan.entries[t].frame == 5 + t);
        const double d = test::max_vertex_distance(r.meshes[t], lib.frames[5 + t]);
        if (t == 2)
            CHECK(d > 1e-3);
        else
            CHECK(d < 1e-6);
    }
}

TEST_CASE("transition weight steers the plan") {
    const SkinnedModel& m = human();
    const Library lib = make_library();
    const MotionGraph g = build_motion_graph(lib.tracked, lib.poses, m.skeleton, 1.0, 3);
    // Follows A then B: the A -> B edge matches best but costs more than A -> C.
    const std::vector<SwingTwistPose> target = slice(lib.poses, 0, 10);
    SynthesisParams p;
    p.exact = true;
    p.lambda = 1.0;
    const SynthesisPlan cheap = plan_synthesis(g, m.skeleton, target, p);
    REQUIRE(cheap.entries.size() == 10);
    CHECK(cheap.entries[5].frame == 5);

    p.lambda = 1e12;
    const SynthesisPlan stiff = plan_synthesis(g, m.skeleton, target, p);
    REQUIRE(stiff.entries.size() == 10);
    for (std::size_t t = 1; t < stiff.entries.size(); ++t) {
        const PlanEntry& prev = stiff.entries[t - 1];
        const PlanEntry& cur = stiff.entries[t];
        if (cur.node == prev.node) continue;
        bool zero_edge = false;
        for (const MotionEdge& e : g.edges)
            if (e.from == prev.node && e.to == cur.node && e.cost == 0.0) zero_edge = true;
        CHECK(zero_edge);
    }
    CHECK(stiff.entries[5].frame == 10);

    const SynthesisResult out = synthesize(g, m, lib.glues, target, p);
    CHECK(out.meshes.size() == target.size());
    for (const TriMesh& mesh : out.meshes) CHECK(mesh.faces == lib.frames[0].faces);
}

TEST_CASE("unreachable targets hold frames with a warning") {
    const SkinnedModel& m = human();
    const Library lib = make_library();
    const MotionGraph g = build_motion_graph(lib.tracked, lib.poses, m.skeleton, 0.0, 3);
    CHECK(g.edges.empty());
    const std::vector<SwingTwistPose> target = slice(lib.poses, 0, 8);
    SynthesisParams p;
    Warnings w;
    const SynthesisPlan plan = plan_synthesis(g, m.skeleton, target, p, &w);
    REQUIRE(plan.entries.size() == 8);
    CHECK_FALSE(w.empty());
    bool held = false;
    for (const PlanEntry& e : plan.entries) held = held || e.held;
    CHECK(held);
    CHECK_THROWS_AS(plan_synthesis(g, m.skeleton, {}, p), InvalidArgument);
}
