#include "test_util.hpp"
#include "vva/mesh_io.hpp"
#include "vva/serialization.hpp"
#include "vva/synthetic.hpp"

#include <fstream>

using namespace vva;

namespace {

bool same_pose(const SwingTwistPose& a, const SwingTwistPose& b) {
    if (a.joints.size() != b.joints.size()) return false;
    if (a.root_rotation.coeffs() != b.root_rotation.coeffs() || a.root_translation != b.root_translation) return false;
    for (std::size_t j = 0; j < a.joints.size(); ++j)
        if (a.joints[j].as_vector() != b.joints[j].as_vector()) return false;
    return true;
}

Json through_text(const Json& j) { return Json::parse(j.dump(2)); }

void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

}  // namespace

TEST_CASE("report numbers are short and stable") {
    CHECK(report_number(0.1 + 0.2).dump() == "0.3");
    CHECK(report_number(1.0 / 3.0).dump() == "0.333333333");
    CHECK(report_number(12345678901.0).dump() == "12345678900.0");
    CHECK(report_number(std::nan("")).is_null());
    CHECK(report_number(-INFINITY).is_null());
}

TEST_CASE("pose round trip is exact") {
    const SkinnedModel m = make_human_model(0);
    std::mt19937_64 rng(3);
    std::vector<SwingTwistPose> poses;
    for (int i = 0; i < 5; ++i) {
        SwingTwistPose p = test::random_pose(m.skeleton, rng, 45.0);
        p.root_rotation = test::random_quat(rng);
        p.root_translation = test::random_vec(rng);
        poses.push_back(p);
    }
    for (const SwingTwistPose& p : poses) CHECK(same_pose(pose_from_json(through_text(pose_to_json(p))), p));
    const auto back = poses_from_json(through_text(poses_to_json(poses)));
    REQUIRE(back.size() == poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) CHECK(same_pose(back[i], poses[i]));
}

TEST_CASE("model save and load") {
    const SkinnedModel m = make_human_model(1);
    const auto dir = test::fresh_dir("model");
    save_model(m, dir / "model.json");
    const SkinnedModel back = load_model(dir / "model.json");
    CHECK(test::bit_identical(back.mesh, m.mesh));
    REQUIRE(back.skeleton.size() == m.skeleton.size());
    for (std::size_t j = 0; j < m.skeleton.size(); ++j) {
        const Joint& a = m.skeleton.joints[j];
        const Joint& b = back.skeleton.joints[j];
        CHECK(a.name == b.name);
        CHECK(a.parent == b.parent);
        CHECK(a.offset == b.offset);
        CHECK(a.twist_axis == b.twist_axis);
        CHECK(a.limits.has_value() == b.limits.has_value());
        if (a.limits && b.limits) {
            CHECK(a.limits->lower == b.limits->lower);
            CHECK(a.limits->upper == b.limits->upper);
        }
    }
    REQUIRE(back.weights.size() == m.weights.size());
    for (std::size_t v = 0; v < m.weights.size(); ++v) {
        REQUIRE(back.weights[v].size() == m.weights[v].size());
        for (std::size_t i = 0; i < m.weights[v].size(); ++i) {
            CHECK(back.weights[v][i].joint == m.weights[v][i].joint);
            CHECK(back.weights[v][i].weight == m.weights[v][i].weight);
        }
    }
    const SwingTwistPose pose = demo_trajectory(m.skeleton, 5, 30.0)[2];
    CHECK(test::bit_identical(skin(back, pose), skin(m, pose)));
}

TEST_CASE("model loading errors") {
    const SkinnedModel m = make_human_model(0);
    const auto dir = test::fresh_dir("model_errors");
    save_model(m, dir / "model.json");
    Json j = read_json(dir / "model.json");

    Json bad = j;
    bad.erase("joints");
    write_json(bad, dir / "no_skeleton.json");
    CHECK_THROWS_AS(load_model(dir / "no_skeleton.json"), ValidationError);

    bad = j;
    bad["weights"][0] = Json::array({Json::array({0, 0.5})});
    write_json(bad, dir / "bad_weights.json");
    try {
        load_model(dir / "bad_weights.json");
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("vertex 0") != std::string::npos);
    }

    std::filesystem::remove(dir / "model.ply");
    CHECK_THROWS_AS(load_model(dir / "model.json"), ValidationError);
    CHECK_THROWS_AS(load_model(dir / "absent.json"), IoError);
}

TEST_CASE("malformed JSON reports a byte offset") {
    const auto dir = test::fresh_dir("malformed");
    write_text(dir / "a.json", "{\"frames\": [1, 2,, 3]}");
    try {
        read_json(dir / "a.json");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.location() == 18);
        CHECK(e.code() == "parse");
    }
}

TEST_CASE("prior round trip") {
    PosePriorGMM g;
    g.weights = {0.25, 0.75};
    g.means = {Eigen::VectorXd::LinSpaced(4, 0.1, 0.4), Eigen::VectorXd::LinSpaced(4, -1.0, 1.0 / 3.0)};
    g.variances = {Eigen::VectorXd::Constant(4, 0.01), Eigen::VectorXd::LinSpaced(4, 0.2, 0.7)};
    const PosePriorGMM b = prior_from_json(through_text(prior_to_json(g)));
    CHECK(b.weights == g.weights);
    for (int k = 0; k < 2; ++k) {
        CHECK(b.means[k] == g.means[k]);
        CHECK(b.variances[k] == g.variances[k]);
    }
    Json bad = prior_to_json(g);
    bad["components"][0]["variance"][1] = -1.0;
    CHECK_THROWS_AS(prior_from_json(bad), ValidationError);
}

TEST_CASE("deformation graph round trip") {
    const TriMesh mesh = make_icosphere(2);
    DeformationGraph g = build_graph(mesh, 0.4);
    std::mt19937_64 rng(4);
    for (GraphNode& n : g.nodes) {
        n.rotation = test::random_quat(rng);
        n.translation = test::random_vec(rng, 0.1);
    }
    const DeformationGraph b = graph_from_json(through_text(graph_to_json(g)));
    CHECK(b.k == g.k);
    CHECK(b.edges == g.edges);
    CHECK(b.binding_nodes == g.binding_nodes);
    CHECK(b.binding_weights == g.binding_weights);
    CHECK(b.node_spacing == g.node_spacing);
    CHECK(test::bit_identical(apply_deformation(b, mesh), apply_deformation(g, mesh)));

    Json bad = graph_to_json(g);
    bad["edges"][0] = Json::array({0, 100000});
    CHECK_THROWS_AS(graph_from_json(bad), ValidationError);
}

TEST_CASE("glue map round trip") {
    const SkinnedModel m = make_human_model(1);
    const TriMesh fitted = skin(m, SwingTwistPose::zero(m.skeleton.size()));
    TriMesh frame = make_icosphere(2);
    for (Vec3& v : frame.vertices) v = 0.2 * v + Vec3(0, 1.2, 0);
    const GlueMap g = build_glue_map(frame, fitted);
    const GlueMap b = glue_from_json(through_text(glue_to_json(g)));
    CHECK(b.faces == g.faces);
    CHECK(b.template_faces == g.template_faces);
    CHECK(b.outliers == g.outliers);
    CHECK(test::bit_identical(reconstruct(b, fitted), reconstruct(g, fitted)));

    Json bad = glue_to_json(g);
    bad["template_faces"] = 2;
    CHECK_THROWS_AS(glue_from_json(bad), ValidationError);
}

TEST_CASE("motion graph and plan round trip") {
    const SkinnedModel m = make_human_model(0);
    const auto traj = demo_trajectory(m.skeleton, 12, 30.0);
    TrackedSequence tracked;
    for (std::size_t g = 0; g < 3; ++g) {
        TrackedGroup tg;
        tg.keyframe = 4 * g + 1;
        for (std::size_t i = 0; i < 4; ++i) tg.members.push_back(4 * g + i);
        tracked.groups.push_back(tg);
    }
    const MotionGraph graph = build_motion_graph(tracked, traj, m.skeleton, 5.0, 4);
    REQUIRE_FALSE(graph.edges.empty());
    const MotionGraph gb = motion_graph_from_json(through_text(motion_graph_to_json(graph)));
    REQUIRE(gb.nodes.size() == graph.nodes.size());
    for (std::size_t n = 0; n < graph.nodes.size(); ++n) {
        CHECK(gb.nodes[n].group == graph.nodes[n].group);
        CHECK(gb.nodes[n].keyframe == graph.nodes[n].keyframe);
        CHECK(gb.nodes[n].frames == graph.nodes[n].frames);
        for (std::size_t i = 0; i < graph.nodes[n].poses.size(); ++i)
            CHECK(same_pose(gb.nodes[n].poses[i], graph.nodes[n].poses[i]));
    }
    REQUIRE(gb.edges.size() == graph.edges.size());
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        CHECK(gb.edges[e].from == graph.edges[e].from);
        CHECK(gb.edges[e].to == graph.edges[e].to);
        CHECK(gb.edges[e].cost == graph.edges[e].cost);
        CHECK(gb.edges[e].blend_window == graph.edges[e].blend_window);
    }

    std::vector<SwingTwistPose> target(traj.rbegin(), traj.rend());
    SynthesisParams p;
    p.exact = true;
    const SynthesisPlan plan = plan_synthesis(graph, m.skeleton, target, p);
    const SynthesisPlan pb = plan_from_json(through_text(plan_to_json(plan)));
    CHECK(plan_to_json(pb) == plan_to_json(plan));
    REQUIRE(pb.entries.size() == plan.entries.size());
    for (std::size_t t = 0; t < plan.entries.size(); ++t) {
        CHECK(pb.entries[t].frame == plan.entries[t].frame);
        CHECK(pb.entries[t].blended == plan.entries[t].blended);
        CHECK(pb.entries[t].delta_root_rotation.coeffs() == plan.entries[t].delta_root_rotation.coeffs());
    }
}

TEST_CASE("parameter blocks") {
    RegistrationParams r;
    r.levels = 2;
    r.arap_weight = 0.37;
    r.rigid_prealign = false;
    const RegistrationParams rb = registration_params_from_json(through_text(registration_params_to_json(r)));
    CHECK(registration_params_to_json(rb) == registration_params_to_json(r));

    FitParams f;
    f.bounds = BoundsMode::Barrier;
    f.prior_weight = 0.25;
    f.max_vertices = 123;
    CHECK(fit_params_to_json(fit_params_from_json(fit_params_to_json(f))) == fit_params_to_json(f));

    SynthesisParams s;
    s.lambda = 1e12;
    s.registration.levels = 1;
    CHECK(synthesis_params_to_json(synthesis_params_from_json(synthesis_params_to_json(s))) ==
          synthesis_params_to_json(s));

    // Partial blocks override only the named fields.
    const RegistrationParams partial = registration_params_from_json(Json{{"levels", 5}});
    CHECK(partial.levels == 5);
    CHECK(partial.arap_weight == RegistrationParams{}.arap_weight);

    CHECK_THROWS_AS(registration_params_from_json(Json{{"levels", "three"}}), ValidationError);
    CHECK_THROWS_AS(registration_params_from_json(Json{{"levels", 0}}), InvalidArgument);
    CHECK_THROWS_AS(fit_params_from_json(Json{{"bounds", "soft"}}), ValidationError);
    CHECK_THROWS_AS(synthesis_params_from_json(Json{{"lambda", -1.0}}), InvalidArgument);
}

TEST_CASE("manifest") {
    const auto dir = test::fresh_dir("manifest");
    const TriMesh cube = make_cube();
    save_mesh(cube, dir / "a.ply");
    save_mesh(cube, dir / "b.obj");
    save_manifest({"a.ply", "b.obj"}, 30.0, dir / "seq.json");
    const Manifest man = load_manifest(dir / "seq.json");
    CHECK(man.frame_rate == 30.0);
    REQUIRE(man.frames.size() == 2);
    const MeshSequence seq = load_sequence(man);
    CHECK(seq.frames.size() == 2);
    CHECK(test::bit_identical(seq.frames[1], cube));

    save_manifest({"a.ply", "missing.ply"}, 30.0, dir / "bad.json");
    CHECK_THROWS_AS(load_manifest(dir / "bad.json"), ValidationError);
    save_manifest({}, 30.0, dir / "empty.json");
    CHECK_THROWS_AS(load_manifest(dir / "empty.json"), ValidationError);
    write_json(Json{{"frame_rate", -1.0}, {"frames", {"a.ply"}}}, dir / "rate.json");
    CHECK_THROWS_AS(load_manifest(dir / "rate.json"), ValidationError);
}
