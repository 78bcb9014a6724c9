#include "vva/serialization.hpp"

#include "vva/mesh_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vva {

namespace fs = std::filesystem;

Json report_number(double value) {
    if (!std::isfinite(value)) return nullptr;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return std::strtod(buf, nullptr);
}

Json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return Json::parse(ss.str());
    } catch (const Json::parse_error& e) {
        throw ParseError(path.string() + ": malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what(),
                         e.byte);
    }
}

void write_json(const Json& json, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << json.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

namespace {

// Field access with errors naming the field.
const Json& field(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(where + ": missing field '" + key + "'");
    return *it;
}

template <class T>
T as(const Json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const Json::exception&) {
        throw ValidationError(where + ": wrong type");
    }
}

template <class T>
T get(const Json& j, const char* key, const std::string& where) {
    return as<T>(field(j, key, where), where + "." + key);
}

template <class T>
void maybe(const Json& j, const char* key, T& out, const std::string& where) {
    if (j.is_object() && j.contains(key)) out = as<T>(j.at(key), where + "." + key);
}

Json vec(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ValidationError(where + ": expected 3 numbers");
    return Vec3(as<double>(j[0], where), as<double>(j[1], where), as<double>(j[2], where));
}

Json quat(const Quat& q) { return Json::array({q.w(), q.x(), q.y(), q.z()}); }

Quat quat(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 4) throw ValidationError(where + ": expected 4 numbers (w, x, y, z)");
    const Quat q(as<double>(j[0], where), as<double>(j[1], where), as<double>(j[2], where), as<double>(j[3], where));
    if (std::abs(q.norm() - 1.0) > 1e-6) throw ValidationError(where + ": quaternion is not unit length");
    // Written quaternions come back bit-identical; hand-edited ones are renormalized.
    return std::abs(q.norm() - 1.0) <= 1e-12 ? q : q.normalized();
}

Eigen::VectorXd vecx(const Json& j, const std::string& where) {
    if (!j.is_array()) throw ValidationError(where + ": expected an array");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = as<double>(j[i], where);
    return v;
}

Json vecx(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

}  // namespace

Json pose_to_json(const SwingTwistPose& pose) {
    Json joints = Json::array();
    for (const JointAngles& a : pose.joints) joints.push_back(vec(a.as_vector()));
    return {{"root_rotation", quat(pose.root_rotation)},
            {"root_translation", vec(pose.root_translation)},
            {"joints", joints}};
}

SwingTwistPose pose_from_json(const Json& j) {
    SwingTwistPose p;
    p.root_rotation = quat(field(j, "root_rotation", "pose"), "pose.root_rotation");
    p.root_translation = vec3(field(j, "root_translation", "pose"), "pose.root_translation");
    const Json& joints = field(j, "joints", "pose");
    if (!joints.is_array()) throw ValidationError("pose.joints: expected an array");
    for (std::size_t i = 0; i < joints.size(); ++i)
        p.joints.push_back(JointAngles::from_vector(vec3(joints[i], "pose.joints[" + std::to_string(i) + "]")));
    return p;
}

Json poses_to_json(const std::vector<SwingTwistPose>& poses) {
    Json a = Json::array();
    for (const auto& p : poses) a.push_back(pose_to_json(p));
    return {{"poses", a}};
}

std::vector<SwingTwistPose> poses_from_json(const Json& j) {
    const Json& a = j.is_array() ? j : field(j, "poses", "pose list");
    if (!a.is_array()) throw ValidationError("pose list: expected an array");
    std::vector<SwingTwistPose> out;
    for (const Json& p : a) out.push_back(pose_from_json(p));
    return out;
}

Json skeleton_to_json(const Skeleton& skeleton) {
    Json joints = Json::array();
    for (const Joint& jt : skeleton.joints) {
        Json o = {{"name", jt.name}, {"parent", jt.parent}, {"offset", vec(jt.offset)}, {"twist_axis", vec(jt.twist_axis)}};
        if (jt.limits) o["limits"] = {{"lower", vec(jt.limits->lower)}, {"upper", vec(jt.limits->upper)}};
        joints.push_back(o);
    }
    return joints;
}

Skeleton skeleton_from_json(const Json& j) {
    if (!j.is_array()) throw ValidationError("skeleton: expected an array of joints");
    Skeleton s;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string where = "joints[" + std::to_string(i) + "]";
        Joint jt;
        jt.name = get<std::string>(j[i], "name", where);
        jt.parent = get<int>(j[i], "parent", where);
        jt.offset = vec3(field(j[i], "offset", where), where + ".offset");
        jt.twist_axis = vec3(field(j[i], "twist_axis", where), where + ".twist_axis");
        if (j[i].contains("limits") && !j[i]["limits"].is_null()) {
            JointLimits lim;
            lim.lower = vec3(field(j[i]["limits"], "lower", where + ".limits"), where + ".limits.lower");
            lim.upper = vec3(field(j[i]["limits"], "upper", where + ".limits"), where + ".limits.upper");
            jt.limits = lim;
        }
        s.joints.push_back(jt);
    }
    s.validate();
    return s;
}

void save_model(const SkinnedModel& model, const fs::path& json_path) {
    const fs::path mesh_path = fs::path(json_path).replace_extension(".ply");
    save_mesh(model.mesh, mesh_path);
    Json weights = Json::array();
    for (const auto& row : model.weights) {
        Json r = Json::array();
        for (const SkinInfluence& inf : row) r.push_back(Json::array({inf.joint, inf.weight}));
        weights.push_back(r);
    }
    write_json({{"mesh", mesh_path.filename().string()}, {"joints", skeleton_to_json(model.skeleton)}, {"weights", weights}},
               json_path);
}

SkinnedModel load_model(const fs::path& json_path) {
    const Json j = read_json(json_path);
    SkinnedModel m;
    const std::string mesh_name = get<std::string>(j, "mesh", "model");
    const fs::path mesh_path = json_path.parent_path() / mesh_name;
    if (!fs::exists(mesh_path)) throw ValidationError("model: mesh file not found: " + mesh_path.string());
    m.mesh = load_mesh(mesh_path);
    m.skeleton = skeleton_from_json(field(j, "joints", "model"));
    const Json& w = field(j, "weights", "model");
    if (!w.is_array()) throw ValidationError("model.weights: expected an array");
    for (std::size_t v = 0; v < w.size(); ++v) {
        std::vector<SkinInfluence> row;
        if (!w[v].is_array()) throw ValidationError("model.weights[" + std::to_string(v) + "]: expected an array");
        for (const Json& e : w[v]) {
            if (!e.is_array() || e.size() != 2)
                throw ValidationError("model.weights[" + std::to_string(v) + "]: entries are [joint, weight]");
            row.push_back({as<int>(e[0], "model.weights"), as<double>(e[1], "model.weights")});
        }
        m.weights.push_back(std::move(row));
    }
    m.validate();
    return m;
}

Json prior_to_json(const PosePriorGMM& prior) {
    Json comps = Json::array();
    for (std::size_t k = 0; k < prior.components(); ++k)
        comps.push_back({{"weight", prior.weights[k]}, {"mean", vecx(prior.means[k])}, {"variance", vecx(prior.variances[k])}});
    return {{"components", comps}};
}

PosePriorGMM prior_from_json(const Json& j) {
    PosePriorGMM g;
    const Json& comps = field(j, "components", "prior");
    if (!comps.is_array()) throw ValidationError("prior.components: expected an array");
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const std::string where = "prior.components[" + std::to_string(k) + "]";
        g.weights.push_back(get<double>(comps[k], "weight", where));
        g.means.push_back(vecx(field(comps[k], "mean", where), where + ".mean"));
        g.variances.push_back(vecx(field(comps[k], "variance", where), where + ".variance"));
    }
    g.validate();
    return g;
}

Json graph_to_json(const DeformationGraph& graph) {
    Json nodes = Json::array();
    for (const GraphNode& n : graph.nodes)
        nodes.push_back({{"position", vec(n.position)}, {"rotation", quat(n.rotation)}, {"translation", vec(n.translation)}});
    Json edges = Json::array();
    for (const auto& [a, b] : graph.edges) edges.push_back(Json::array({a, b}));
    return {{"k", graph.k},
            {"node_spacing", graph.node_spacing},
            {"nodes", nodes},
            {"edges", edges},
            {"bindings", {{"nodes", graph.binding_nodes}, {"weights", graph.binding_weights}}}};
}

DeformationGraph graph_from_json(const Json& j) {
    DeformationGraph g;
    g.k = get<int>(j, "k", "graph");
    g.node_spacing = get<double>(j, "node_spacing", "graph");
    const Json& nodes = field(j, "nodes", "graph");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string where = "graph.nodes[" + std::to_string(i) + "]";
        GraphNode n;
        n.position = vec3(field(nodes[i], "position", where), where);
        n.rotation = quat(field(nodes[i], "rotation", where), where);
        n.translation = vec3(field(nodes[i], "translation", where), where);
        g.nodes.push_back(n);
    }
    for (const Json& e : field(j, "edges", "graph")) {
        const auto pair = as<std::vector<int>>(e, "graph.edges");
        if (pair.size() != 2) throw ValidationError("graph.edges: entries are [a, b]");
        g.edges.emplace_back(pair[0], pair[1]);
    }
    const Json& b = field(j, "bindings", "graph");
    g.binding_nodes = get<std::vector<int>>(b, "nodes", "graph.bindings");
    g.binding_weights = get<std::vector<double>>(b, "weights", "graph.bindings");
    if (g.k < 1 || g.binding_nodes.size() != g.binding_weights.size() || g.binding_nodes.size() % g.k != 0)
        throw ValidationError("graph.bindings: sizes do not match k");
    for (int n : g.binding_nodes)
        if (n < 0 || static_cast<std::size_t>(n) >= g.nodes.size())
            throw ValidationError("graph.bindings: node " + std::to_string(n) + " out of range");
    for (const auto& [a, c] : g.edges)
        if (a < 0 || c < 0 || static_cast<std::size_t>(std::max(a, c)) >= g.nodes.size())
            throw ValidationError("graph.edges: node out of range");
    return g;
}

Json glue_to_json(const GlueMap& glue) {
    Json face = Json::array(), bary = Json::array(), offset = Json::array();
    for (const GlueEntry& e : glue.entries) {
        face.push_back(e.face);
        bary.push_back(vec(e.bary));
        offset.push_back(e.offset);
    }
    Json faces = Json::array();
    for (const Face& f : glue.faces) faces.push_back(Json::array({f[0], f[1], f[2]}));
    return {{"template_faces", glue.template_faces},
            {"faces", faces},
            {"entries", {{"face", face}, {"bary", bary}, {"offset", offset}}},
            {"outliers", glue.outliers}};
}

GlueMap glue_from_json(const Json& j) {
    GlueMap g;
    g.template_faces = get<std::size_t>(j, "template_faces", "glue");
    for (const Json& f : field(j, "faces", "glue")) {
        const auto v = as<std::vector<int>>(f, "glue.faces");
        if (v.size() != 3) throw ValidationError("glue.faces: entries are [a, b, c]");
        g.faces.push_back({v[0], v[1], v[2]});
    }
    const Json& e = field(j, "entries", "glue");
    const auto face = get<std::vector<int>>(e, "face", "glue.entries");
    const Json& bary = field(e, "bary", "glue.entries");
    const auto offset = get<std::vector<double>>(e, "offset", "glue.entries");
    if (bary.size() != face.size() || offset.size() != face.size())
        throw ValidationError("glue.entries: face, bary and offset differ in length");
    for (std::size_t i = 0; i < face.size(); ++i) {
        if (face[i] < 0 || static_cast<std::size_t>(face[i]) >= g.template_faces)
            throw ValidationError("glue.entries: vertex " + std::to_string(i) + " references face " +
                                  std::to_string(face[i]) + " out of range");
        g.entries.push_back({face[i], vec3(bary[i], "glue.entries.bary"), offset[i]});
    }
    maybe(j, "outliers", g.outliers, "glue");
    return g;
}

Json motion_graph_to_json(const MotionGraph& graph) {
    Json nodes = Json::array(), edges = Json::array();
    for (const MotionNode& n : graph.nodes) {
        Json poses = Json::array();
        for (const auto& p : n.poses) poses.push_back(pose_to_json(p));
        nodes.push_back({{"group", n.group}, {"keyframe", n.keyframe}, {"frames", n.frames}, {"poses", poses}});
    }
    for (const MotionEdge& e : graph.edges)
        edges.push_back({{"from", e.from}, {"to", e.to}, {"cost", e.cost}, {"blend_window", e.blend_window}});
    return {{"nodes", nodes}, {"edges", edges}};
}

MotionGraph motion_graph_from_json(const Json& j) {
    MotionGraph g;
    for (const Json& n : field(j, "nodes", "motion graph")) {
        MotionNode node;
        node.group = get<std::size_t>(n, "group", "motion graph node");
        node.keyframe = get<std::size_t>(n, "keyframe", "motion graph node");
        node.frames = get<std::vector<std::size_t>>(n, "frames", "motion graph node");
        for (const Json& p : field(n, "poses", "motion graph node")) node.poses.push_back(pose_from_json(p));
        g.nodes.push_back(std::move(node));
    }
    for (const Json& e : field(j, "edges", "motion graph"))
        g.edges.push_back({get<std::size_t>(e, "from", "motion graph edge"), get<std::size_t>(e, "to", "motion graph edge"),
                           get<double>(e, "cost", "motion graph edge"), get<int>(e, "blend_window", "motion graph edge")});
    g.validate();
    return g;
}

Json plan_to_json(const SynthesisPlan& plan) {
    Json entries = Json::array();
    for (const PlanEntry& e : plan.entries) {
        Json angles = Json::array();
        for (const Vec3& a : e.delta_angles) angles.push_back(vec(a));
        Json o = {{"node", e.node},
                  {"index", e.index},
                  {"frame", e.frame},
                  {"pose_cost", e.pose_cost},
                  {"transition_cost", e.transition_cost},
                  {"held", e.held},
                  {"delta",
                   {{"root_rotation", quat(e.delta_root_rotation)},
                    {"root_translation", vec(e.delta_root_translation)},
                    {"angles", angles}}}};
        o["blend"] = e.blended ? Json{{"from", e.blend_from}, {"index", e.blend_index}, {"window", e.blend_window}}
                               : Json(nullptr);
        entries.push_back(o);
    }
    return {{"exact", plan.exact}, {"lambda", plan.lambda}, {"total_cost", plan.total_cost}, {"entries", entries}};
}

SynthesisPlan plan_from_json(const Json& j) {
    SynthesisPlan p;
    p.exact = get<bool>(j, "exact", "plan");
    p.lambda = get<double>(j, "lambda", "plan");
    p.total_cost = get<double>(j, "total_cost", "plan");
    for (const Json& o : field(j, "entries", "plan")) {
        PlanEntry e;
        e.node = get<std::size_t>(o, "node", "plan entry");
        e.index = get<std::size_t>(o, "index", "plan entry");
        e.frame = get<std::size_t>(o, "frame", "plan entry");
        e.pose_cost = get<double>(o, "pose_cost", "plan entry");
        e.transition_cost = get<double>(o, "transition_cost", "plan entry");
        e.held = get<bool>(o, "held", "plan entry");
        const Json& d = field(o, "delta", "plan entry");
        e.delta_root_rotation = quat(field(d, "root_rotation", "plan delta"), "plan delta");
        e.delta_root_translation = vec3(field(d, "root_translation", "plan delta"), "plan delta");
        for (const Json& a : field(d, "angles", "plan delta")) e.delta_angles.push_back(vec3(a, "plan delta angles"));
        const Json& b = field(o, "blend", "plan entry");
        if (!b.is_null()) {
            e.blended = true;
            e.blend_from = get<std::size_t>(b, "from", "plan blend");
            e.blend_index = get<int>(b, "index", "plan blend");
            e.blend_window = get<int>(b, "window", "plan blend");
        }
        p.entries.push_back(std::move(e));
    }
    return p;
}

Json registration_params_to_json(const RegistrationParams& p) {
    return {{"levels", p.levels},
            {"iters_per_level", p.iters_per_level},
            {"max_corr_dist", p.max_corr_dist},
            {"max_normal_angle", p.max_normal_angle},
            {"arap_weight", p.arap_weight},
            {"point_to_plane_weight", p.point_to_plane_weight},
            {"node_spacing", p.node_spacing},
            {"nodes_per_vertex", p.nodes_per_vertex},
            {"level_spacing_ratio", p.level_spacing_ratio},
            {"coarse_gate_scale", p.coarse_gate_scale},
            {"rigid_prealign", p.rigid_prealign}};
}

RegistrationParams registration_params_from_json(const Json& j, RegistrationParams p) {
    const std::string w = "registration";
    maybe(j, "levels", p.levels, w);
    maybe(j, "iters_per_level", p.iters_per_level, w);
    maybe(j, "max_corr_dist", p.max_corr_dist, w);
    maybe(j, "max_normal_angle", p.max_normal_angle, w);
    maybe(j, "arap_weight", p.arap_weight, w);
    maybe(j, "point_to_plane_weight", p.point_to_plane_weight, w);
    maybe(j, "node_spacing", p.node_spacing, w);
    maybe(j, "nodes_per_vertex", p.nodes_per_vertex, w);
    maybe(j, "level_spacing_ratio", p.level_spacing_ratio, w);
    maybe(j, "coarse_gate_scale", p.coarse_gate_scale, w);
    maybe(j, "rigid_prealign", p.rigid_prealign, w);
    p.validate();
    return p;
}

Json fit_params_to_json(const FitParams& p) {
    return {{"max_distance", p.max_distance},
            {"max_normal_angle", p.max_normal_angle},
            {"prior_weight", p.prior_weight},
            {"laplacian_weight", p.laplacian_weight},
            {"bounds", p.bounds == BoundsMode::Clamp ? "clamp" : "barrier"},
            {"barrier_weight", p.barrier_weight},
            {"max_iters", p.max_iters},
            {"convergence_tol", p.convergence_tol},
            {"max_vertices", p.max_vertices},
            {"alternation_rounds", p.alternation_rounds},
            {"shape_iters", p.shape_iters},
            {"adapt_shape", p.adapt_shape}};
}

FitParams fit_params_from_json(const Json& j, FitParams p) {
    const std::string w = "fit";
    maybe(j, "max_distance", p.max_distance, w);
    maybe(j, "max_normal_angle", p.max_normal_angle, w);
    maybe(j, "prior_weight", p.prior_weight, w);
    maybe(j, "laplacian_weight", p.laplacian_weight, w);
    if (j.is_object() && j.contains("bounds")) {
        const std::string b = as<std::string>(j["bounds"], "fit.bounds");
        if (b == "clamp") p.bounds = BoundsMode::Clamp;
        else if (b == "barrier") p.bounds = BoundsMode::Barrier;
        else throw ValidationError("fit.bounds: expected \"clamp\" or \"barrier\", got \"" + b + "\"");
    }
    maybe(j, "barrier_weight", p.barrier_weight, w);
    maybe(j, "max_iters", p.max_iters, w);
    maybe(j, "convergence_tol", p.convergence_tol, w);
    maybe(j, "max_vertices", p.max_vertices, w);
    maybe(j, "alternation_rounds", p.alternation_rounds, w);
    maybe(j, "shape_iters", p.shape_iters, w);
    maybe(j, "adapt_shape", p.adapt_shape, w);
    p.validate();
    return p;
}

Json synthesis_params_to_json(const SynthesisParams& p) {
    return {{"lambda", p.lambda},
            {"beam_width", p.beam_width},
            {"exact", p.exact},
            {"cost_threshold", p.cost_threshold},
            {"blend_window", p.blend_window},
            {"registration", registration_params_to_json(p.registration)}};
}

SynthesisParams synthesis_params_from_json(const Json& j, SynthesisParams p) {
    const std::string w = "synthesis";
    maybe(j, "lambda", p.lambda, w);
    maybe(j, "beam_width", p.beam_width, w);
    maybe(j, "exact", p.exact, w);
    maybe(j, "cost_threshold", p.cost_threshold, w);
    maybe(j, "blend_window", p.blend_window, w);
    if (j.is_object() && j.contains("registration"))
        p.registration = registration_params_from_json(j["registration"], p.registration);
    p.validate();
    return p;
}

Manifest load_manifest(const fs::path& path) {
    const Json j = read_json(path);
    Manifest m;
    maybe(j, "frame_rate", m.frame_rate, "manifest");
    if (!(m.frame_rate > 0.0)) throw ValidationError("manifest: frame_rate must be positive");
    const auto names = get<std::vector<std::string>>(j, "frames", "manifest");
    if (names.empty()) throw ValidationError("manifest: no frames");
    for (const std::string& n : names) {
        const fs::path p = path.parent_path() / n;
        if (!fs::exists(p)) throw ValidationError("manifest: frame file not found: " + p.string());
        m.frames.push_back(p);
    }
    return m;
}

void save_manifest(const std::vector<std::string>& frame_names, double frame_rate, const fs::path& path) {
    write_json({{"frame_rate", frame_rate}, {"frames", frame_names}}, path);
}

MeshSequence load_sequence(const Manifest& manifest) {
    MeshSequence seq;
    seq.frame_rate = manifest.frame_rate;
    for (const fs::path& p : manifest.frames) seq.frames.push_back(load_mesh(p));
    return seq;
}

}  // namespace vva
