#include "vva/pipeline.hpp"

#include "vva/geometry.hpp"
#include "vva/mesh_io.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

namespace vva {

namespace fs = std::filesystem;

namespace {

std::string numbered(const char* prefix, std::size_t i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%03zu%s", prefix, i, ext);
    return buf;
}

fs::path resolve(const fs::path& base, const Json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return {};
    if (!j[key].is_string()) throw ValidationError(std::string("config.") + key + ": expected a path string");
    const fs::path p = j[key].get<std::string>();
    if (p.empty()) return {};
    return p.is_absolute() ? p : base / p;
}

Json numbers(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(report_number(x));
    return a;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const Json& j, const fs::path& base) {
    if (!j.is_object()) throw ValidationError("config: expected a JSON object");
    PipelineConfig c;
    c.manifest = resolve(base, j, "manifest");
    c.model = resolve(base, j, "model");
    c.init_pose = resolve(base, j, "init_pose");
    c.prior = resolve(base, j, "prior");
    c.target_poses = resolve(base, j, "target_poses");
    c.output = resolve(base, j, "output");
    if (j.contains("keyframes")) {
        if (!j["keyframes"].is_string()) throw ValidationError("config.keyframes: expected e.g. \"every_nth:10\"");
        try {
            c.keyframes = KeyframePolicy::parse(j["keyframes"].get<std::string>());
        } catch (const InvalidArgument& e) {
            throw ValidationError(std::string("config.keyframes: ") + e.what());
        }
    }
    auto integer = [&](const char* key, auto& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer()) throw ValidationError(std::string("config.") + key + ": expected an integer");
        out = j[key].get<std::remove_reference_t<decltype(out)>>();
    };
    integer("overlap", c.overlap);
    integer("threads", c.threads);
    integer("seed", c.seed);
    try {
        if (j.contains("registration")) c.registration = registration_params_from_json(j["registration"]);
        if (j.contains("fit")) c.fit = fit_params_from_json(j["fit"]);
        if (j.contains("synthesis")) c.synthesis = synthesis_params_from_json(j["synthesis"]);
    } catch (const InvalidArgument& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    return c;
}

Json PipelineConfig::to_json() const {
    auto str = [](const fs::path& p) { return p.empty() ? Json(nullptr) : Json(p.string()); };
    return {{"manifest", str(manifest)},
            {"model", str(model)},
            {"init_pose", str(init_pose)},
            {"prior", str(prior)},
            {"target_poses", str(target_poses)},
            {"output", str(output)},
            {"keyframes", keyframes.to_string()},
            {"overlap", overlap},
            {"registration", registration_params_to_json(registration)},
            {"fit", fit_params_to_json(fit)},
            {"synthesis", synthesis_params_to_json(synthesis)},
            {"threads", threads},
            {"seed", seed}};
}

void PipelineConfig::validate() const {
    auto required = [](const fs::path& p, const char* what) {
        if (p.empty()) throw ValidationError(std::string("config: ") + what + " path is required");
        if (!fs::exists(p)) throw ValidationError(std::string("config: ") + what + " not found: " + p.string());
    };
    auto optional = [](const fs::path& p, const char* what) {
        if (!p.empty() && !fs::exists(p))
            throw ValidationError(std::string("config: ") + what + " not found: " + p.string());
    };
    required(manifest, "manifest");
    required(model, "model");
    optional(init_pose, "init_pose");
    optional(prior, "prior");
    optional(target_poses, "target_poses");
    if (output.empty()) throw ValidationError("config: output path is required");
    if (overlap < 0) throw ValidationError("config: overlap must be non-negative");
    if (threads < 0) throw ValidationError("config: threads must be non-negative");
    try {
        keyframes.validate();
        registration.validate();
        fit.validate();
        synthesis.validate();
    } catch (const InvalidArgument& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
}

Json write_tracking(const TrackedSequence& tracked, const std::vector<std::string>& names, const KeyframePolicy& policy,
                    int overlap, const fs::path& dir) {
    fs::create_directories(dir);
    Json frames = Json::array();
    for (const TrackedFrame& f : tracked.frames) {
        const std::string name = fs::path(names.at(f.frame)).stem().string() + ".ply";
        save_mesh(f.mesh, dir / name);
        frames.push_back({{"index", f.frame},
                          {"name", name},
                          {"keyframe", f.keyframe},
                          {"error", report_number(f.error)},
                          {"chain_length", f.chain_length},
                          {"converged", f.converged}});
    }
    Json groups = Json::array();
    for (const TrackedGroup& g : tracked.groups) groups.push_back({{"keyframe", g.keyframe}, {"members", g.members}});
    Json merges = Json::array();
    for (const MergeDecision& m : tracked.merges) {
        Json rej = Json::array();
        for (const auto& [k, e] : m.rejected) rej.push_back({{"keyframe", k}, {"error", report_number(e)}});
        merges.push_back({{"frame", m.frame},
                          {"chosen_keyframe", m.chosen_keyframe},
                          {"chosen_error", report_number(m.chosen_error)},
                          {"rejected", rej}});
    }
    const Json report = {{"policy", policy.to_string()}, {"overlap", overlap}, {"frames", frames},
                         {"groups", groups},            {"merges", merges},   {"warnings", tracked.warnings}};
    write_json(report, dir / "tracking_report.json");
    return report;
}

TrackedSequence read_tracking(const fs::path& dir, std::vector<std::string>* names) {
    const Json report = read_json(dir / "tracking_report.json");
    TrackedSequence t;
    try {
        for (const Json& f : report.at("frames")) {
            TrackedFrame tf;
            tf.frame = f.at("index").get<std::size_t>();
            tf.keyframe = f.at("keyframe").get<std::size_t>();
            tf.error = f.at("error").is_null() ? 0.0 : f.at("error").get<double>();
            tf.chain_length = f.at("chain_length").get<int>();
            tf.converged = f.at("converged").get<bool>();
            const std::string name = f.at("name").get<std::string>();
            tf.mesh = load_mesh(dir / name);
            if (names) names->push_back(name);
            t.frames.push_back(std::move(tf));
        }
        for (const Json& g : report.at("groups"))
            t.groups.push_back({g.at("keyframe").get<std::size_t>(), g.at("members").get<std::vector<std::size_t>>()});
        t.warnings = report.value("warnings", Warnings{});
    } catch (const Json::exception& e) {
        throw ValidationError("tracking report " + (dir / "tracking_report.json").string() + ": " + e.what());
    }
    return t;
}

Json write_fits(const PoseTrack& track, const fs::path& dir) {
    fs::create_directories(dir);
    Json frames = Json::array();
    std::vector<SwingTwistPose> poses;
    for (std::size_t i = 0; i < track.fits.size(); ++i) {
        const FitResult& r = track.fits[i];
        write_json(pose_to_json(r.pose), dir / numbered("pose_", i, ".json"));
        poses.push_back(r.pose);
        frames.push_back({{"index", i},
                          {"ok", r.ok},
                          {"failure", r.failure},
                          {"residual", report_number(r.residual)},
                          {"iterations", r.iterations},
                          {"converged", r.converged},
                          {"energy_trace", numbers(r.energy_trace)}});
    }
    write_json(poses_to_json(poses), dir / "poses.json");
    save_model(track.model, dir / "model.json");
    const Json report = {{"frames", frames}, {"warnings", track.warnings}};
    write_json(report, dir / "fit_report.json");
    return report;
}

std::vector<SwingTwistPose> read_fitted_poses(const fs::path& dir) { return poses_from_json(read_json(dir / "poses.json")); }

std::vector<GlueMap> glue_frames(const std::vector<TriMesh>& frames, const SkinnedModel& model,
                                 const std::vector<SwingTwistPose>& poses, std::vector<double>* errors,
                                 Warnings* warnings) {
    if (frames.size() != poses.size())
        throw InvalidArgument("glue: " + std::to_string(frames.size()) + " frames but " + std::to_string(poses.size()) +
                              " poses");
    std::vector<GlueMap> glues(frames.size());
    if (errors) errors->assign(frames.size(), 0.0);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const TriMesh fitted = skin(model, poses[i]);
        Warnings w;
        glues[i] = build_glue_map(frames[i], fitted, &w);
        for (const auto& s : w) if (warnings) warnings->push_back("frame " + std::to_string(i) + ": " + s);
        if (errors) {
            const TriMesh back = reconstruct(glues[i], fitted);
            double e = 0.0;
            for (std::size_t v = 0; v < back.vertices.size(); ++v)
                e = std::max(e, (back.vertices[v] - frames[i].vertices[v]).norm());
            (*errors)[i] = e;
        }
    }
    return glues;
}

Json write_glues(const std::vector<GlueMap>& glues, const std::vector<double>& errors, const fs::path& dir) {
    fs::create_directories(dir);
    Json frames = Json::array();
    for (std::size_t i = 0; i < glues.size(); ++i) {
        write_json(glue_to_json(glues[i]), dir / numbered("glue_", i, ".json"));
        frames.push_back({{"index", i},
                          {"vertices", glues[i].entries.size()},
                          {"outliers", glues[i].outliers.size()},
                          {"reconstruction_error", report_number(i < errors.size() ? errors[i] : 0.0)}});
    }
    const Json report = {{"frames", frames}};
    write_json(report, dir / "glue_report.json");
    return report;
}

std::vector<GlueMap> read_glues(const fs::path& dir) {
    const Json report = read_json(dir / "glue_report.json");
    std::vector<GlueMap> out;
    for (std::size_t i = 0; i < report.at("frames").size(); ++i)
        out.push_back(glue_from_json(read_json(dir / numbered("glue_", i, ".json"))));
    return out;
}

Json write_synthesis(const SynthesisResult& result, const MotionGraph& graph, const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < result.meshes.size(); ++i) {
        names.push_back(numbered("frame_", i, ".ply"));
        save_mesh(result.meshes[i], dir / names.back());
    }
    write_json(plan_to_json(result.plan), dir / "plan.json");
    write_json(motion_graph_to_json(graph), dir / "motion_graph.json");
    save_manifest(names, 25.0, dir / "manifest.json");
    return {{"frames", result.meshes.size()},
            {"total_cost", report_number(result.plan.total_cost)},
            {"exact", result.plan.exact},
            {"nodes", graph.nodes.size()},
            {"edges", graph.edges.size()},
            {"warnings", result.warnings}};
}

RunOutcome run_pipeline(const PipelineConfig& config, const Progress& progress) {
    config.validate();
    RunOutcome out;
    Json stages = Json::array();
    Warnings warnings;
    Json frames_report = Json::array();
    Json timings = Json::object();
    std::string failed;
    const fs::path root = config.output;
    fs::create_directories(root);
    auto say = [&](const std::string& s) {
        if (progress) progress(s);
    };

    auto timed = [&](const char* name, auto&& fn) {
        if (!failed.empty()) {
            stages.push_back({{"name", name}, {"status", "skipped"}});
            return;
        }
        say(std::string("stage ") + name);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            fn();
            stages.push_back({{"name", name}, {"status", "ok"}});
        } catch (const Error& e) {
            failed = name;
            stages.push_back({{"name", name}, {"status", "failed"}, {"error", e.code()}, {"message", e.what()}});
        }
        timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    Manifest manifest;
    MeshSequence seq;
    SkinnedModel model;
    SwingTwistPose init;
    std::optional<PosePriorGMM> prior;
    std::vector<std::string> names;
    TrackedSequence tracked;
    PoseTrack fits;
    std::vector<GlueMap> glues;
    std::vector<double> glue_errors;

    timed("load", [&] {
        manifest = load_manifest(config.manifest);
        seq = load_sequence(manifest);
        for (const fs::path& p : manifest.frames) names.push_back(p.filename().string());
        model = load_model(config.model);
        init = config.init_pose.empty() ? SwingTwistPose::zero(model.skeleton.size())
                                        : pose_from_json(read_json(config.init_pose));
        if (!config.prior.empty()) prior = prior_from_json(read_json(config.prior));
    });
    timed("track", [&] {
        tracked = track_sequence(seq, config.keyframes, config.registration, config.overlap);
        write_tracking(tracked, names, config.keyframes, config.overlap, root / "tracked");
        for (const auto& w : tracked.warnings) warnings.push_back("track: " + w);
    });
    timed("fit", [&] {
        std::vector<const TriMesh*> meshes;
        for (const TrackedFrame& f : tracked.frames) meshes.push_back(&f.mesh);
        fits = track_poses(model, meshes, init, prior ? &*prior : nullptr, config.fit);
        write_fits(fits, root / "fits");
        for (const auto& w : fits.warnings) warnings.push_back("fit: " + w);
    });
    std::vector<SwingTwistPose> poses;
    timed("glue", [&] {
        std::vector<TriMesh> meshes;
        for (const TrackedFrame& f : tracked.frames) {
            meshes.push_back(f.mesh);
        }
        for (const FitResult& r : fits.fits) poses.push_back(r.pose);
        Warnings w;
        glues = glue_frames(meshes, fits.model, poses, &glue_errors, &w);
        write_glues(glues, glue_errors, root / "glue");
        for (const auto& s : w) warnings.push_back("glue: " + s);
    });
    Json synth_report = nullptr;
    timed("synth", [&] {
        const MotionGraph graph = build_motion_graph(tracked, poses, fits.model.skeleton,
                                                     config.synthesis.cost_threshold, config.synthesis.blend_window);
        const std::vector<SwingTwistPose> target =
            config.target_poses.empty() ? poses : poses_from_json(read_json(config.target_poses));
        std::map<std::size_t, GlueMap> by_frame;
        for (std::size_t i = 0; i < glues.size(); ++i) by_frame[i] = glues[i];
        const SynthesisResult result = synthesize(graph, fits.model, by_frame, target, config.synthesis);
        synth_report = write_synthesis(result, graph, root / "synth");
        for (const auto& w : result.warnings) warnings.push_back("synth: " + w);
    });

    for (std::size_t i = 0; i < tracked.frames.size(); ++i) {
        const TrackedFrame& f = tracked.frames[i];
        Json row = {{"index", f.frame}, {"name", names.at(f.frame)}, {"keyframe", f.keyframe},
                    {"tracking_error", report_number(f.error)}};
        row["fit_residual"] = i < fits.fits.size() ? report_number(fits.fits[i].residual) : Json(nullptr);
        row["glue_error"] = i < glue_errors.size() ? report_number(glue_errors[i]) : Json(nullptr);
        frames_report.push_back(row);
    }
    Json keyframes = Json::array();
    for (const TrackedGroup& g : tracked.groups) keyframes.push_back({{"keyframe", g.keyframe}, {"members", g.members}});

    out.ok = failed.empty();
    out.report = {{"stages", stages},
                  {"failed_stage", failed.empty() ? Json(nullptr) : Json(failed)},
                  {"frames", frames_report},
                  {"groups", keyframes},
                  {"synthesis", synth_report},
                  {"warnings", warnings}};
    out.timings = timings;
    write_json(out.report, root / "run_report.json");
    write_json(out.timings, root / "timings.json");
    return out;
}

std::string describe_path(const fs::path& path) {
    std::ostringstream os;
    auto mesh_summary = [&](const TriMesh& m) {
        const BBox b = bounding_box(m);
        os << "vertices " << m.vertices.size() << "\nfaces " << m.faces.size() << "\n";
        if (b.valid())
            os << "bbox [" << b.min.x() << ", " << b.min.y() << ", " << b.min.z() << "] - [" << b.max.x() << ", "
               << b.max.y() << ", " << b.max.z() << "]\n";
        os << "area " << surface_area(m) << "\n";
        for (const ComponentGenus& c : genus_per_component(m)) {
            os << "component " << c.component << ": ";
            if (c.genus) os << "genus " << *c.genus << "\n";
            else os << (c.topology == ComponentTopology::Open ? "open (boundary)" : "non-manifold") << "\n";
        }
    };
    auto groups_summary = [&](const Json& report) {
        os << "groups " << report.at("groups").size() << "\n";
        for (const Json& g : report.at("groups")) {
            const auto members = g.at("members").get<std::vector<std::size_t>>();
            os << "keyframe " << g.at("keyframe").get<std::size_t>() << ": frames";
            for (std::size_t m : members) os << ' ' << m;
            os << "\n";
        }
    };

    if (!fs::exists(path)) throw IoError("no such file or directory: " + path.string());
    if (fs::is_directory(path)) {
        if (fs::exists(path / "tracking_report.json")) {
            groups_summary(read_json(path / "tracking_report.json"));
            return os.str();
        }
        if (fs::exists(path / "run_report.json")) return describe_path(path / "run_report.json");
        throw InvalidArgument("unknown directory layout: " + path.string());
    }
    const std::string ext = path.extension().string();
    if (ext == ".obj" || ext == ".ply") {
        mesh_summary(load_mesh(path));
        return os.str();
    }
    if (ext != ".json") throw InvalidArgument("unknown format: " + path.string());
    const Json j = read_json(path);
    if (j.contains("joints") && j.contains("weights")) {
        const SkinnedModel m = load_model(path);
        os << "model\njoints " << m.skeleton.size() << "\n";
        for (const Joint& jt : m.skeleton.joints) os << "  " << jt.name << " parent " << jt.parent << "\n";
        mesh_summary(m.mesh);
    } else if (j.contains("frames") && j.contains("groups")) {
        os << "report\nframes " << j.at("frames").size() << "\n";
        groups_summary(j);
    } else if (j.contains("frames") && j.contains("frame_rate")) {
        const Manifest m = load_manifest(path);
        os << "manifest\nframes " << m.frames.size() << "\nframe_rate " << m.frame_rate << "\n";
        for (const fs::path& p : m.frames) {
            const TriMesh mesh = load_mesh(p);
            os << "  " << p.filename().string() << ": V " << mesh.vertices.size() << " F " << mesh.faces.size() << "\n";
        }
    } else if (j.contains("root_rotation")) {
        const SwingTwistPose p = pose_from_json(j);
        os << "pose\njoints " << p.joints.size() << "\n";
    } else if (j.contains("poses")) {
        os << "pose list\nposes " << poses_from_json(j).size() << "\n";
    } else if (j.contains("components")) {
        const PosePriorGMM g = prior_from_json(j);
        os << "pose prior\ncomponents " << g.components() << "\ndimension " << g.dimension() << "\n";
    } else if (j.contains("entries") && j.contains("total_cost")) {
        os << "synthesis plan\nentries " << j.at("entries").size() << "\n";
    } else {
        throw InvalidArgument("unknown JSON document: " + path.string());
    }
    return os.str();
}

}  // namespace vva
