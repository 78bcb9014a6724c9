// Command-line front end. Every failure prints one line
// "error: <code>: <message>" to stderr and exits nonzero.
#include "vva/decimate.hpp"
#include "vva/mesh_io.hpp"
#include "vva/pipeline.hpp"
#include "vva/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <omp.h>

namespace fs = std::filesystem;
using namespace vva;

namespace {

bool g_verbose = false;

void note(const std::string& s) {
    if (g_verbose) std::cerr << s << '\n';
}

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

Json load_config(const std::string& path) {
    if (path.empty()) return Json::object();
    return read_json(path);
}

RegistrationParams registration_from(const Json& cfg) {
    return cfg.contains("registration") ? registration_params_from_json(cfg["registration"]) : RegistrationParams{};
}

void print_warnings(const Warnings& w) {
    for (const auto& s : w) std::cerr << "warning: " << one_line(s) << '\n';
}

std::vector<TriMesh> tracked_meshes(const TrackedSequence& t) {
    std::vector<TriMesh> out;
    for (const TrackedFrame& f : t.frames) out.push_back(f.mesh);
    return out;
}

// Synthetic inputs for trying the pipeline: a skinned human, a sequence of
// posed frames, the rest pose and a config.
void make_demo(const fs::path& dir, int frames, int subdivisions, double degrees) {
    fs::create_directories(dir / "sequence");
    const SkinnedModel model = make_human_model(subdivisions);
    save_model(model, dir / "model.json");
    const std::vector<SwingTwistPose> poses = demo_trajectory(model.skeleton, frames, degrees);
    std::vector<std::string> names;
    for (int t = 0; t < frames; ++t) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "frame_%03d.ply", t);
        names.push_back(buf);
        save_mesh(skin(model, poses[t]), dir / "sequence" / buf);
    }
    save_manifest(names, 25.0, dir / "sequence" / "manifest.json");
    write_json(pose_to_json(poses.front()), dir / "init_pose.json");
    write_json(poses_to_json(poses), dir / "true_poses.json");
    PipelineConfig cfg;
    cfg.keyframes = KeyframePolicy::parse("every_nth:10");
    Json j = cfg.to_json();
    j["manifest"] = "sequence/manifest.json";
    j["model"] = "model.json";
    j["init_pose"] = "init_pose.json";
    j["output"] = "out";
    write_json(j, dir / "config.json");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Volumetric video toolkit: tracking, body-model fitting, retargeting and resynthesis"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads = 0;
    std::uint64_t seed = 0;
    app.add_option("--threads", threads, "Worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
    app.add_option("--seed", seed, "Seed for randomized utilities");
    app.add_flag("--verbose", g_verbose, "Progress on stderr");

    std::string path_a, path_b, out, config, importance, model_path, tracked_dir, fits_dir, glue_dir, init_path,
        prior_path, pose_path, target_path, graph_out, keyframes = "every_nth:10";
    int target_faces = 0, overlap = 2, demo_frames = 20, demo_subdiv = 3;
    double ratio = 0.0, exponent = 2.0, demo_degrees = 20.0;

    auto* info = app.add_subcommand("info", "Summarize a mesh, manifest, model, pose file, report or tracked directory");
    info->add_option("path", path_a)->required();

    auto* dec = app.add_subcommand("decimate", "Importance-weighted quadric edge collapse");
    dec->add_option("input", path_a)->required();
    dec->add_option("output", out)->required();
    dec->add_option("--target-faces", target_faces, "Face budget");
    dec->add_option("--ratio", ratio, "Face budget as a fraction of the input");
    dec->add_option("--importance", importance, "Per-vertex importance file (default: .imp sidecar)");
    dec->add_option("--exponent", exponent, "Importance exponent");

    auto* reg = app.add_subcommand("register", "Non-rigid registration of a source mesh onto a target");
    reg->add_option("source", path_a)->required();
    reg->add_option("target", path_b)->required();
    reg->add_option("--out", out, "Deformed source mesh")->required();
    reg->add_option("--graph", graph_out, "Write the solved finest deformation graph");
    reg->add_option("--config", config, "JSON config (registration section)");

    auto* trk = app.add_subcommand("track", "Keyframe-based tracking of a mesh sequence");
    trk->add_option("manifest", path_a)->required();
    trk->add_option("--out", out, "Output directory")->required();
    trk->add_option("--keyframes", keyframes, "every_nth:N or scored:N");
    trk->add_option("--overlap", overlap, "Frames tracked past each group boundary")->check(CLI::NonNegativeNumber);
    trk->add_option("--config", config, "JSON config (registration section)");

    auto* fit = app.add_subcommand("fit", "Fit the skinned model to every tracked frame");
    fit->add_option("--model", model_path)->required();
    fit->add_option("--tracked", tracked_dir)->required();
    fit->add_option("--init", init_path, "Pose of the first frame (default: zero pose)");
    fit->add_option("--prior", prior_path);
    fit->add_option("--out", out)->required();
    fit->add_option("--config", config, "JSON config (fit section)");

    auto* glue = app.add_subcommand("glue", "Glue tracked frames to the fitted model");
    glue->add_option("--fits", fits_dir, "Output directory of fit")->required();
    glue->add_option("--tracked", tracked_dir)->required();
    glue->add_option("--out", out)->required();

    auto* ret = app.add_subcommand("retarget", "Move a glued frame to a new pose");
    ret->add_option("--fits", fits_dir, "Output directory of fit (adapted model)")->required();
    ret->add_option("--glue", path_a, "Glue map JSON of the frame")->required();
    ret->add_option("--pose", pose_path, "Target pose JSON")->required();
    ret->add_option("--out", out, "Output mesh")->required();

    auto* syn = app.add_subcommand("synth", "Resynthesize a performance for a target pose sequence");
    syn->add_option("--fits", fits_dir)->required();
    syn->add_option("--tracked", tracked_dir)->required();
    syn->add_option("--glue", glue_dir)->required();
    syn->add_option("--target", target_path, "Pose list JSON")->required();
    syn->add_option("--out", out)->required();
    syn->add_option("--config", config, "JSON config (synthesis section)");

    auto* run = app.add_subcommand("run", "track -> fit -> glue -> synth from one config file");
    run->add_option("--config", config)->required();
    run->add_option("--out", out, "Override the config's output directory");

    int components = 4;
    auto* pri = app.add_subcommand("prior", "Fit a Gaussian-mixture pose prior to a pose list (EM, seeded by --seed)");
    pri->add_option("--poses", pose_path, "Pose list JSON")->required();
    pri->add_option("--components", components)->check(CLI::PositiveNumber);
    pri->add_option("--out", out)->required();

    auto* demo = app.add_subcommand("make-demo", "Write a synthetic model, sequence and config");
    demo->add_option("--out", out)->required();
    demo->add_option("--frames", demo_frames)->check(CLI::PositiveNumber);
    demo->add_option("--subdivisions", demo_subdiv)->check(CLI::Range(0, 5));
    demo->add_option("--degrees", demo_degrees, "Peak joint swing (0 = static)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: argument: " << one_line(e.what()) << '\n';
        return 2;
    }

    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (*info) {
            std::cout << describe_path(path_a);
        } else if (*dec) {
            const TriMesh mesh = load_mesh_with_importance(path_a, importance);
            DecimationParams p;
            p.importance_exponent = exponent;
            if (target_faces > 0) p.target_faces = static_cast<std::size_t>(target_faces);
            else if (ratio > 0.0) p.target_faces = static_cast<std::size_t>(ratio * mesh.faces.size());
            else throw InvalidArgument("decimate: give --target-faces or --ratio");
            const DecimationResult r = decimate(mesh, p);
            print_warnings(r.warnings);
            save_mesh(r.mesh, out);
            if (!r.mesh.importance.empty() && !mesh.importance.empty()) save_importance(r.mesh.importance, sidecar_path(out));
            std::cout << "faces " << mesh.faces.size() << " -> " << r.mesh.faces.size() << '\n';
        } else if (*reg) {
            const RegistrationParams params = registration_from(load_config(config));
            const TriMesh source = load_mesh(path_a), target = load_mesh(path_b);
            const RegistrationResult r = register_meshes(source, target, params);
            print_warnings(r.warnings);
            save_mesh(r.deformed_source, out);
            if (!graph_out.empty()) write_json(graph_to_json(r.graph), graph_out);
            std::cout << "error " << r.error << "\nconverged " << (r.converged ? "yes" : "no") << '\n';
        } else if (*trk) {
            const Json cfg = load_config(config);
            const RegistrationParams params = registration_from(cfg);
            const KeyframePolicy policy = KeyframePolicy::parse(keyframes);
            const Manifest m = load_manifest(path_a);
            const MeshSequence seq = load_sequence(m);
            std::vector<std::string> names;
            for (const auto& p : m.frames) names.push_back(p.filename().string());
            note("tracking " + std::to_string(seq.size()) + " frames");
            const TrackedSequence t = track_sequence(seq, policy, params, overlap);
            print_warnings(t.warnings);
            write_tracking(t, names, policy, overlap, out);
            std::cout << "groups " << t.groups.size() << '\n';
        } else if (*fit) {
            const Json cfg = load_config(config);
            const FitParams params = cfg.contains("fit") ? fit_params_from_json(cfg["fit"]) : FitParams{};
            const SkinnedModel model = load_model(model_path);
            const TrackedSequence t = read_tracking(tracked_dir);
            const SwingTwistPose init =
                init_path.empty() ? SwingTwistPose::zero(model.skeleton.size()) : pose_from_json(read_json(init_path));
            std::optional<PosePriorGMM> prior;
            if (!prior_path.empty()) prior = prior_from_json(read_json(prior_path));
            std::vector<const TriMesh*> meshes;
            for (const TrackedFrame& f : t.frames) meshes.push_back(&f.mesh);
            const PoseTrack track = track_poses(model, meshes, init, prior ? &*prior : nullptr, params);
            print_warnings(track.warnings);
            write_fits(track, out);
            std::cout << "frames " << track.fits.size() << '\n';
        } else if (*glue) {
            const SkinnedModel model = load_model(fs::path(fits_dir) / "model.json");
            const TrackedSequence t = read_tracking(tracked_dir);
            std::vector<double> errors;
            Warnings w;
            const auto glues = glue_frames(tracked_meshes(t), model, read_fitted_poses(fits_dir), &errors, &w);
            print_warnings(w);
            write_glues(glues, errors, out);
            std::cout << "frames " << glues.size() << '\n';
        } else if (*ret) {
            const SkinnedModel model = load_model(fs::path(fits_dir) / "model.json");
            const GlueMap g = glue_from_json(read_json(path_a));
            save_mesh(retarget(g, model, pose_from_json(read_json(pose_path))), out);
        } else if (*syn) {
            const Json cfg = load_config(config);
            const SynthesisParams params =
                cfg.contains("synthesis") ? synthesis_params_from_json(cfg["synthesis"]) : SynthesisParams{};
            const SkinnedModel model = load_model(fs::path(fits_dir) / "model.json");
            const TrackedSequence t = read_tracking(tracked_dir);
            const auto poses = read_fitted_poses(fits_dir);
            const auto glues = read_glues(glue_dir);
            std::map<std::size_t, GlueMap> by_frame;
            for (std::size_t i = 0; i < glues.size(); ++i) by_frame[i] = glues[i];
            const MotionGraph graph =
                build_motion_graph(t, poses, model.skeleton, params.cost_threshold, params.blend_window);
            const SynthesisResult r = synthesize(graph, model, by_frame, poses_from_json(read_json(target_path)), params);
            print_warnings(r.warnings);
            write_synthesis(r, graph, out);
            std::cout << "frames " << r.meshes.size() << '\n';
        } else if (*run) {
            const fs::path cfg_path = config;
            PipelineConfig cfg = PipelineConfig::from_json(read_json(cfg_path), cfg_path.parent_path());
            if (!out.empty()) cfg.output = out;
            if (threads > 0) cfg.threads = threads;
            if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
            const RunOutcome r = run_pipeline(cfg, note);
            if (!r.ok) {
                const std::string stage = r.report["failed_stage"].get<std::string>();
                for (const Json& s : r.report["stages"])
                    if (s["name"] == stage)
                        throw Error(s["error"].get<std::string>(),
                                    "stage " + stage + " failed: " + s["message"].get<std::string>());
            }
            print_warnings(r.report["warnings"].get<Warnings>());
            std::cout << "frames " << r.report["frames"].size() << '\n';
        } else if (*pri) {
            std::vector<Eigen::VectorXd> samples;
            for (const SwingTwistPose& p : poses_from_json(read_json(pose_path))) samples.push_back(pose_scalars(p));
            write_json(prior_to_json(fit_gmm(samples, components, seed)), out);
        } else if (*demo) {
            make_demo(out, demo_frames, demo_subdiv, demo_degrees);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.code() << ": " << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}
