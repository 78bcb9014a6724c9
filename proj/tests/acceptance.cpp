// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include "vva/animate.hpp"
#include "vva/decimate.hpp"
#include "vva/fitting.hpp"
#include "vva/geometry.hpp"
#include "vva/registration.hpp"
#include "vva/spatial_index.hpp"
#include "vva/synthetic.hpp"
#include "vva/tracking.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace vva;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Clock {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Accumulates sub-checks into one outcome.
struct Checks {
    Outcome out;
    void operator()(bool ok, const std::string& what) {
        out.pass = out.pass && ok;
        if (!out.detail.empty()) out.detail += "; ";
        out.detail += what + (ok ? "" : " [failed]");
    }
};

Quat random_quat(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Quat(n(rng), n(rng), n(rng), n(rng)).normalized();
}

Vec3 random_vec(std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    return {u(rng), u(rng), u(rng)};
}

SwingTwistPose random_pose(const Skeleton& sk, std::mt19937_64& rng, double deg) {
    std::uniform_real_distribution<double> u(-deg * M_PI / 180.0, deg * M_PI / 180.0);
    SwingTwistPose p = SwingTwistPose::zero(sk.size());
    for (std::size_t j = 1; j < sk.size(); ++j) p.joints[j] = JointAngles::from_vector({u(rng), u(rng), u(rng)});
    p.root_rotation = random_quat(rng);
    p.root_translation = random_vec(rng, 1.0);
    return p;
}

double max_distance(const TriMesh& a, const TriMesh& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.vertices.size(); ++i) m = std::max(m, (a.vertices[i] - b.vertices[i]).norm());
    return m;
}

double max_distance(const TriMesh& a, const TriMesh& b, const Quat& r, const Vec3& t) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.vertices.size(); ++i) m = std::max(m, (a.vertices[i] - (r * b.vertices[i] + t)).norm());
    return m;
}

bool bit_identical(const TriMesh& a, const TriMesh& b) {
    if (a.vertices.size() != b.vertices.size() || a.faces != b.faces) return false;
    for (std::size_t i = 0; i < a.vertices.size(); ++i)
        if (std::memcmp(a.vertices[i].data(), b.vertices[i].data(), 3 * sizeof(double)) != 0) return false;
    return true;
}

SwingTwistPose moved(SwingTwistPose p, const Quat& r, const Vec3& t) {
    p.root_rotation = r * p.root_rotation;
    p.root_translation = r * p.root_translation + t;
    return p;
}

TriMesh offset_along_normals(const TriMesh& m, double h) {
    TriMesh out = m;
    const auto n = vertex_normals(m);
    for (std::size_t v = 0; v < n.size(); ++v) out.vertices[v] += h * n[v];
    return out;
}

const SkinnedModel& human50k() {
    static const SkinnedModel m = make_human_model(4);
    return m;
}

// 1 and 2 share the registration run.
const RegistrationResult& articulated_registration(double* seconds) {
    static double elapsed = 0.0;
    static const RegistrationResult r = [] {
        const SkinnedModel& m = human50k();
        const TriMesh target = skin(m, articulated_pose(m.skeleton, 10.0));
        const Clock c;
        RegistrationResult out = register_meshes(m.mesh, target);
        elapsed = c.seconds();
        return out;
    }();
    if (seconds) *seconds = elapsed;
    return r;
}

Outcome registration_throughput() {
    Checks c;
    double s = 0.0;
    const RegistrationResult& r = articulated_registration(&s);
    const std::size_t faces = human50k().mesh.faces.size();
    c(faces >= 50000, std::to_string(faces) + " faces");
    c(r.levels.size() == 3, std::to_string(r.levels.size()) + " levels");
    c(s <= 10.0, fmt("%.2f s", s));
    return c.out;
}

Outcome registration_accuracy() {
    Checks c;
    const RegistrationResult& r = articulated_registration(nullptr);
    c(r.error < 1e-3, fmt("articulated RMS %.3g m", r.error));

    const TriMesh& a = human50k().mesh;
    const double diag = bounding_box(a).diagonal();
    const Mat3 R = Eigen::AngleAxisd(30.0 * M_PI / 180.0, Vec3(0.3, 1.0, -0.2).normalized()).toRotationMatrix();
    const Vec3 t(0.1 * diag, 0.0, 0.0);
    const RegistrationResult rigid = register_meshes(a, transformed(a, R, t));
    c(rigid.error < 1e-4 * diag, fmt("rigid RMS %.3g", rigid.error) + fmt(" (bound %.3g)", 1e-4 * diag));
    return c.out;
}

// Posed frames of the human, each re-meshed by its own decimation so that no
// two frames share connectivity.
MeshSequence articulated_sequence(int frames, int subdivisions, double degrees) {
    const SkinnedModel model = make_human_model(subdivisions);
    const auto poses = demo_trajectory(model.skeleton, frames, degrees);
    MeshSequence seq;
    for (int f = 0; f < frames; ++f) {
        DecimationParams p;
        p.target_faces = model.mesh.faces.size() - 40 - 10 * f;
        seq.frames.push_back(decimate(skin(model, poses[f]), p).mesh);
    }
    return seq;
}

Outcome tracking_consistency() {
    Checks c;
    const MeshSequence seq = articulated_sequence(20, 3, 20.0);
    const Clock clock;
    const TrackedSequence t = track_sequence(seq, KeyframePolicy::parse("every_nth:10"), RegistrationParams{}, 2);
    const double secs = clock.seconds();

    bool connectivity = true;
    for (const TrackedGroup& g : t.groups)
        for (std::size_t f : g.members) connectivity = connectivity && t.frames[f].mesh.faces == seq.frames[g.keyframe].faces;
    c(connectivity && t.groups.size() == 2, std::to_string(t.groups.size()) + " groups share keyframe connectivity");

    std::size_t ok = 0;
    for (const MergeDecision& m : t.merges) {
        bool best = !m.rejected.empty();
        for (const auto& [kf, err] : m.rejected) best = best && m.chosen_error <= err;
        ok += best;
    }
    c(!t.merges.empty() && ok == t.merges.size(),
      std::to_string(ok) + "/" + std::to_string(t.merges.size()) + " merges chose the smaller error");
    double worst = 0.0;
    for (const TrackedFrame& f : t.frames) worst = std::max(worst, f.error);
    c(true, fmt("max tracking error %.3g m", worst));
    c(secs <= 180.0, fmt("%.1f s", secs));

    MeshSequence still;
    const TriMesh body = make_human_body(3);
    for (int f = 0; f < 20; ++f) still.frames.push_back(body);
    const TrackedSequence s = track_sequence(still, KeyframePolicy::parse("every_nth:10"), RegistrationParams{}, 2);
    double still_worst = 0.0;
    for (const TrackedFrame& f : s.frames) still_worst = std::max(still_worst, f.error);
    c(still_worst < 1e-9, fmt("static max error %.3g m", still_worst));
    return c.out;
}

Outcome swing_twist() {
    Checks c;
    std::mt19937_64 rng(41);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Quat q = random_quat(rng);
        const Vec3 axis = random_vec(rng, 1.0).normalized();
        const SwingTwistSplit s = swing_twist_decompose(q, axis);
        worst = std::max(worst, quat_distance(compose_swing_twist(s.swing, axis, s.twist_angle), q));
    }
    c(worst < 1e-12, fmt("round trip %.3g", worst));

    std::uniform_real_distribution<double> angle(-M_PI + 1e-6, M_PI);
    int exact = 0;
    for (int i = 0; i < 10000; ++i) {
        const Vec3 axis = random_vec(rng, 1.0).normalized();
        const SwingTwistSplit s = swing_twist_decompose(Quat(Eigen::AngleAxisd(angle(rng), axis)), axis);
        exact += s.swing.w() == 1.0 && s.swing.x() == 0.0 && s.swing.y() == 0.0 && s.swing.z() == 0.0;
    }
    c(exact == 10000, std::to_string(exact) + "/10000 pure twists with identity swing");
    return c.out;
}

double mid_ring_area_ratio(const TriMesh& rest, const TriMesh& posed, double y, double radius) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t v = 0; v < rest.vertices.size(); ++v) {
        const Vec3& p = rest.vertices[v];
        if (std::abs(p.y() - y) > 1e-9 || std::hypot(p.x(), p.z()) < 0.5 * radius) continue;
        sum += std::hypot(posed.vertices[v].x(), posed.vertices[v].z()) / radius;
        ++n;
    }
    const double r = n ? sum / n : 0.0;
    return r * r;
}

Outcome skinning() {
    Checks c;
    const SkinnedModel& m = human50k();
    c(bit_identical(skin(m, SwingTwistPose::zero(m.skeleton.size())), m.mesh), "zero pose bit-identical");

    std::mt19937_64 rng(42);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const SwingTwistPose p = random_pose(m.skeleton, rng, 40.0);
        const Quat r = random_quat(rng);
        const Vec3 t = random_vec(rng, 2.0);
        worst = std::max(worst, max_distance(skin(m, moved(p, r, t)), skin(m, p), r, t));
    }
    c(worst < 1e-6, fmt("equivariance %.3g m", worst));

    const SkinnedModel cyl = make_twist_cylinder(0.1, 1.0, 40, 32);
    SwingTwistPose twist = SwingTwistPose::zero(2);
    twist.joints[1].twist = M_PI / 2;
    const double hybrid = 1.0 - mid_ring_area_ratio(cyl.mesh, skin(cyl, twist), 0.5, 0.1);
    const double lbs = 1.0 - mid_ring_area_ratio(cyl.mesh, skin_lbs(cyl, twist), 0.5, 0.1);
    c(hybrid < 0.01 && lbs > 0.10, fmt("twist loss hybrid %.3g", hybrid) + fmt(" vs LBS %.3g", lbs));
    return c.out;
}

double max_scalar_error_deg(const SwingTwistPose& a, const SwingTwistPose& b) {
    return (pose_scalars(a) - pose_scalars(b)).cwiseAbs().maxCoeff() * 180.0 / M_PI;
}

Outcome fitting() {
    Checks c;
    const SkinnedModel m = make_human_model(2);
    const auto motion = demo_trajectory(m.skeleton, 50, 30.0);
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(-5.0 * M_PI / 180.0, 5.0 * M_PI / 180.0);
    int success = 0;
    bool monotone = true;
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const SwingTwistPose& truth = motion[trial];
        SwingTwistPose init = truth;
        for (std::size_t j = 1; j < init.joints.size(); ++j)
            init.joints[j] = JointAngles::from_vector(init.joints[j].as_vector() + Vec3(u(rng), u(rng), u(rng)));
        const FitResult r = fit_pose(m, skin(m, truth), init, nullptr, {});
        const double err = max_scalar_error_deg(r.pose, truth);
        worst = std::max(worst, err);
        success += r.ok && err < 0.5;
        for (const FitStep& s : r.steps) monotone = monotone && s.energy_after <= s.energy_before;
        for (std::size_t i = 1; i < r.energy_trace.size(); ++i)
            monotone = monotone && r.energy_trace[i] <= r.energy_trace[i - 1];
    }
    c(success == 50, std::to_string(success) + "/50 within 0.5 deg" + fmt(" (worst %.3g deg)", worst));
    c(monotone, "energy non-increasing");

    const PoseParameterization par(m.skeleton);
    double worst_rel = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const SwingTwistPose p = random_pose(m.skeleton, rng, 40.0);
        const SkinJacobian sj = skin_with_jacobian(m, p, par);
        const double h = 1e-6;
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < par.size(); ++k) {
            Eigen::VectorXd d = Eigen::VectorXd::Zero(par.size());
            d[k] = h;
            const TriMesh a = skin(m, par.apply(p, d));
            const TriMesh b = skin(m, par.apply(p, -d));
            for (std::size_t v = 0; v < a.vertices.size(); ++v) {
                const Vec3 fd = (a.vertices[v] - b.vertices[v]) / (2 * h);
                const Vec3 an = sj.jacobian.block<3, 1>(3 * v, k);
                num += (fd - an).squaredNorm();
                den += an.squaredNorm();
            }
        }
        worst_rel = std::max(worst_rel, std::sqrt(num / den));
    }
    c(worst_rel < 1e-5, fmt("Jacobian relative error %.3g", worst_rel));
    return c.out;
}

// Clothed-looking frames: the skinned body pushed out 5 mm along its normals.
struct Library {
    SkinnedModel model;
    std::vector<SwingTwistPose> poses;
    std::vector<TriMesh> frames;
    std::map<std::size_t, GlueMap> glues;
};

const Library& library() {
    static const Library lib = [] {
        Library l;
        l.model = make_human_model(2);
        const auto traj = demo_trajectory(l.model.skeleton, 20, 30.0);
        for (int f = 0; f < 10; ++f) l.poses.push_back(traj[f]);
        for (int f = 0; f < 5; ++f) l.poses.push_back(traj[4 - f]);
        for (std::size_t f = 0; f < l.poses.size(); ++f) {
            const TriMesh fitted = skin(l.model, l.poses[f]);
            l.frames.push_back(offset_along_normals(fitted, 0.005));
            l.glues[f] = build_glue_map(l.frames[f], fitted);
        }
        return l;
    }();
    return lib;
}

Outcome glue_retarget() {
    Checks c;
    const Library& lib = library();
    std::mt19937_64 rng(44);
    double recon = 0.0, identity = 0.0, equiv = 0.0;
    for (std::size_t f = 0; f < lib.frames.size(); ++f) {
        const GlueMap& g = lib.glues.at(f);
        recon = std::max(recon, max_distance(reconstruct(g, skin(lib.model, lib.poses[f])), lib.frames[f]));
        identity = std::max(identity, max_distance(retarget(g, lib.model, lib.poses[f]), lib.frames[f]));
        const Quat r = random_quat(rng);
        const Vec3 t = random_vec(rng, 1.0);
        equiv = std::max(equiv, max_distance(retarget(g, lib.model, moved(lib.poses[f], r, t)), lib.frames[f], r, t));
    }
    c(recon < 1e-6, fmt("reconstruction %.3g m", recon));
    c(identity < 1e-6, fmt("identity retarget %.3g m", identity));
    c(equiv < 1e-6, fmt("rigid equivariance %.3g m", equiv));
    return c.out;
}

Outcome synthesis() {
    Checks c;
    const Library& lib = library();
    // Groups A = 0..4, B = 5..9 continuing A, C = 10..14 starting where A ends.
    TrackedSequence tracked;
    for (std::size_t g = 0; g < 3; ++g) {
        TrackedGroup tg;
        tg.keyframe = 5 * g;
        for (std::size_t i = 0; i < 5; ++i) tg.members.push_back(5 * g + i);
        tracked.groups.push_back(tg);
    }
    const MotionGraph graph = build_motion_graph(tracked, lib.poses, lib.model.skeleton, 1.0, 3);

    SynthesisParams p;
    const std::vector<SwingTwistPose> replay(lib.poses.begin() + 5, lib.poses.begin() + 10);
    const SynthesisResult r = synthesize(graph, lib.model, lib.glues, replay, p);
    double worst = r.meshes.size() == replay.size() ? 0.0 : INFINITY;
    bool same_frames = true;
    for (std::size_t t = 0; t < r.meshes.size() && t < replay.size(); ++t) {
        worst = std::max(worst, max_distance(r.meshes[t], lib.frames[5 + t]));
        same_frames = same_frames && r.plan.entries[t].frame == 5 + t;
    }
    c(same_frames && worst < 1e-6, fmt("replay %.3g m", worst));

    std::mt19937_64 rng(45);
    bool lengths = true;
    for (std::size_t len : {1, 7, 23}) {
        std::vector<SwingTwistPose> target;
        for (std::size_t t = 0; t < len; ++t) target.push_back(lib.poses[rng() % lib.poses.size()]);
        lengths = lengths && synthesize(graph, lib.model, lib.glues, target, p).meshes.size() == len;
    }
    c(lengths, "output length equals target length");

    p.lambda = 1e12;
    p.exact = true;
    const std::vector<SwingTwistPose> across(lib.poses.begin(), lib.poses.begin() + 10);
    const SynthesisPlan plan = plan_synthesis(graph, lib.model.skeleton, across, p);
    bool zero_only = plan.entries.size() == across.size();
    int transitions = 0;
    for (std::size_t t = 1; t < plan.entries.size(); ++t) {
        if (plan.entries[t].node == plan.entries[t - 1].node) continue;
        ++transitions;
        bool found = false;
        for (const MotionEdge& e : graph.edges)
            found = found || (e.from == plan.entries[t - 1].node && e.to == plan.entries[t].node && e.cost == 0.0);
        zero_only = zero_only && found;
    }
    c(zero_only, std::to_string(transitions) + " transitions at lambda 1e12, all zero-cost");
    return c.out;
}

double hausdorff_one_sided(const TriMesh& from, const TriMesh& to) {
    const SpatialIndex index(to);
    double h = 0.0;
    for (const Face& f : from.faces) {
        const Vec3 &a = from.vertices[f[0]], &b = from.vertices[f[1]], &d = from.vertices[f[2]];
        for (const Vec3& p : {a, b, d, Vec3((a + b + d) / 3.0), Vec3((a + b) / 2.0), Vec3((b + d) / 2.0), Vec3((a + d) / 2.0)})
            h = std::max(h, index.closest_point(p).distance);
    }
    return h;
}

std::size_t faces_above(const TriMesh& m, double z) {
    std::size_t n = 0;
    for (const Face& f : m.faces)
        if ((m.vertices[f[0]] + m.vertices[f[1]] + m.vertices[f[2]]).z() / 3.0 > z) ++n;
    return n;
}

Outcome decimation() {
    Checks c;
    const TriMesh grid = make_grid(40, 40);
    DecimationParams p;
    p.target_faces = grid.faces.size() / 10;
    const DecimationResult r = decimate(grid, p);
    const double h = std::max(hausdorff_one_sided(grid, r.mesh), hausdorff_one_sided(r.mesh, grid));
    c(r.mesh.faces.size() <= p.target_faces && h < 1e-6,
      std::to_string(grid.faces.size()) + " -> " + std::to_string(r.mesh.faces.size()) + fmt(" faces, Hausdorff %.3g m", h));

    TriMesh sphere = make_icosphere(4);
    p.target_faces = sphere.faces.size() / 10;
    const DecimationResult plain = decimate(sphere, p);
    sphere.importance.resize(sphere.vertices.size());
    for (std::size_t v = 0; v < sphere.vertices.size(); ++v) sphere.importance[v] = sphere.vertices[v].z() > 0.5 ? 1.0 : 0.05;
    const DecimationResult masked = decimate(sphere, p);
    const std::size_t a = faces_above(masked.mesh, 0.5), b = faces_above(plain.mesh, 0.5);
    c(a > b && masked.mesh.faces.size() == plain.mesh.faces.size(),
      "masked region " + std::to_string(a) + " vs " + std::to_string(b) + " triangles");
    return c.out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> outputs(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "timings.json")
            out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + VVA_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    return std::system(cmd.c_str());
}

Outcome determinism() {
    Checks c;
    const fs::path dir = fs::path(VVA_TEST_TMP) / "determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string demo = (dir / "demo").string();
    c(run_cli("make-demo --out \"" + demo + "\" --frames 20", dir / "make_demo.log") == 0, "20-frame suite written");
    const std::string config = (dir / "demo" / "config.json").string();
    const struct {
        const char* name;
        int threads;
    } runs[] = {{"a", 1}, {"b", 1}, {"c", 8}};
    for (const auto& r : runs) {
        const int status = run_cli("run --config \"" + config + "\" --out \"" + (dir / r.name).string() + "\" --threads " +
                                       std::to_string(r.threads),
                                   dir / (std::string(r.name) + ".log"));
        c(status == 0, std::string("run ") + r.name + " with " + std::to_string(r.threads) + " threads");
    }
    const auto a = outputs(dir / "a"), b = outputs(dir / "b"), t8 = outputs(dir / "c");
    c(!a.empty() && a == b, std::to_string(a.size()) + " files identical across repeated runs");
    c(!a.empty() && a == t8, "identical with 1 and 8 threads");
    return c.out;
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"registration throughput", registration_throughput},
        {"registration accuracy", registration_accuracy},
        {"tracking consistency", tracking_consistency},
        {"swing-twist", swing_twist},
        {"skinning", skinning},
        {"fitting", fitting},
        {"glue and retarget", glue_retarget},
        {"synthesis", synthesis},
        {"decimation", decimation},
        {"determinism", determinism},
    };
    int failed = 0, index = 0;
    for (const auto& [name, fn] : criteria) {
        ++index;
        Outcome o;
        const Clock clock;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str(), clock.seconds());
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", index - failed, index);
    return failed ? 1 : 0;
}
