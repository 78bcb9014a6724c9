#include "vva/animate.hpp"

#include "vva/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace vva {

GlueMap build_glue_map(const TriMesh& frame, const TriMesh& fitted, Warnings* warnings) {
    if (fitted.empty()) throw InvalidArgument("glue: fitted template is empty");
    const SpatialIndex index(fitted);
    const std::vector<SurfacePoint> hits = closest_points(index, frame.vertices);
    const std::vector<Vec3> normals = face_normals(fitted);
    const double limit = 0.1 * bounding_box(fitted).diagonal();

    GlueMap glue;
    glue.faces = frame.faces;
    glue.template_faces = fitted.faces.size();
    glue.entries.resize(frame.vertices.size());
    for (std::size_t v = 0; v < frame.vertices.size(); ++v) {
        const SurfacePoint& sp = hits[v];
        const Face& f = fitted.faces[sp.face];
        const Vec3& a = fitted.vertices[f[0]];
        const Vec3& b = fitted.vertices[f[1]];
        const Vec3& c = fitted.vertices[f[2]];
        const Vec3& n = normals[sp.face];
        const Vec3& x = frame.vertices[v];
        GlueEntry& e = glue.entries[v];
        e.face = sp.face;
        e.offset = n.dot(x - a);
        // Barycentrics of the in-plane projection; solved in the face's own
        // edge frame so they are exact up to rounding even off the triangle.
        const Vec3 p = x - e.offset * n;
        const Vec3 e1 = b - a, e2 = c - a, d = p - a;
        const double d11 = e1.dot(e1), d12 = e1.dot(e2), d22 = e2.dot(e2);
        const double r1 = d.dot(e1), r2 = d.dot(e2);
        const double den = d11 * d22 - d12 * d12;
        const double bv = (d22 * r1 - d12 * r2) / den;
        const double bw = (d11 * r2 - d12 * r1) / den;
        e.bary = Vec3(1.0 - bv - bw, bv, bw);
        if (sp.distance > limit) glue.outliers.push_back(static_cast<int>(v));
    }
    if (!glue.outliers.empty() && warnings)
        warnings->push_back("glue: " + std::to_string(glue.outliers.size()) +
                            " frame vertices lie farther than 10% of the template diagonal (first: vertex " +
                            std::to_string(glue.outliers.front()) + ")");
    return glue;
}

TriMesh reconstruct(const GlueMap& glue, const TriMesh& posed) {
    if (posed.faces.size() != glue.template_faces)
        throw InvalidArgument("glue: template has " + std::to_string(posed.faces.size()) + " faces, glue expects " +
                              std::to_string(glue.template_faces));
    TriMesh out;
    out.faces = glue.faces;
    out.vertices.resize(glue.entries.size());
    const std::vector<Vec3> normals = face_normals(posed);
    const long n = static_cast<long>(glue.entries.size());
    for (long v = 0; v < n; ++v) {
        const GlueEntry& e = glue.entries[v];
        if (e.face < 0 || static_cast<std::size_t>(e.face) >= posed.faces.size())
            throw InvalidArgument("glue: vertex " + std::to_string(v) + " references face " + std::to_string(e.face) +
                                  " out of range");
    }
#pragma omp parallel for schedule(static)
    for (long v = 0; v < n; ++v) {
        const GlueEntry& e = glue.entries[v];
        const Face& f = posed.faces[e.face];
        out.vertices[v] = e.bary[0] * posed.vertices[f[0]] + e.bary[1] * posed.vertices[f[1]] +
                          e.bary[2] * posed.vertices[f[2]] + e.offset * normals[e.face];
    }
    return out;
}

TriMesh retarget(const GlueMap& glue, const SkinnedModel& model, const SwingTwistPose& target_pose) {
    return reconstruct(glue, skin(model, target_pose));
}

double pose_distance(const Skeleton& skeleton, const SwingTwistPose& a, const SwingTwistPose& b) {
    if (a.joints.size() != skeleton.size() || b.joints.size() != skeleton.size())
        throw InvalidArgument("pose_distance: poses do not match the skeleton (" + std::to_string(skeleton.size()) +
                              " joints)");
    double d = geodesic_angle(a.root_rotation, b.root_rotation);
    for (std::size_t j = 0; j < skeleton.size(); ++j)
        d += geodesic_angle(joint_rotation(skeleton.joints[j], a.joints[j]),
                            joint_rotation(skeleton.joints[j], b.joints[j]));
    return d;
}

void MotionGraph::validate() const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].frames.empty() || nodes[i].frames.size() != nodes[i].poses.size())
            throw ValidationError("motion graph: node " + std::to_string(i) + " has no frames or mismatched poses");
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const MotionEdge& m = edges[e];
        if (m.from >= nodes.size() || m.to >= nodes.size())
            throw ValidationError("motion graph: edge " + std::to_string(e) + " references a missing node");
        if (!(m.cost >= 0.0)) throw ValidationError("motion graph: edge " + std::to_string(e) + " has negative cost");
        if (m.blend_window < 1)
            throw ValidationError("motion graph: edge " + std::to_string(e) + " has blend window below 1");
    }
}

MotionGraph build_motion_graph(const TrackedSequence& tracked, const std::vector<SwingTwistPose>& poses,
                               const Skeleton& skeleton, double cost_threshold, int blend_window) {
    if (blend_window < 1) throw InvalidArgument("motion graph: blend window must be at least 1");
    MotionGraph g;
    for (std::size_t i = 0; i < tracked.groups.size(); ++i) {
        const TrackedGroup& tg = tracked.groups[i];
        if (tg.members.empty()) continue;
        MotionNode node;
        node.group = i;
        node.keyframe = tg.keyframe;
        node.frames = tg.members;
        for (std::size_t f : tg.members) {
            if (f >= poses.size())
                throw InvalidArgument("motion graph: no fitted pose for frame " + std::to_string(f));
            node.poses.push_back(poses[f]);
        }
        g.nodes.push_back(std::move(node));
    }
    for (std::size_t a = 0; a < g.nodes.size(); ++a)
        for (std::size_t b = 0; b < g.nodes.size(); ++b) {
            if (a == b) continue;
            const double d = pose_distance(skeleton, g.nodes[a].poses.back(), g.nodes[b].poses.front());
            if (d < cost_threshold) g.edges.push_back({a, b, d, blend_window});
        }
    return g;
}

void SynthesisParams::validate() const {
    if (!(lambda >= 0.0)) throw InvalidArgument("synthesis: lambda must be non-negative");
    if (beam_width < 1) throw InvalidArgument("synthesis: beam_width must be at least 1");
    if (!(cost_threshold >= 0.0)) throw InvalidArgument("synthesis: cost_threshold must be non-negative");
    if (blend_window < 1) throw InvalidArgument("synthesis: blend_window must be at least 1");
    registration.validate();
}

namespace {

struct State {
    std::size_t node, index;
};

struct Pred {
    std::size_t state;
    double cost;
    bool hold;
    int edge;  // -1 for progression / hold
};

// Dynamic program over (target step, state). `allowed[t]` restricts the
// states considered at step t (empty = all). Returns false if no full-length
// path exists.
bool run_dp(const MotionGraph& graph, const std::vector<State>& states, const std::vector<std::vector<Pred>>& preds,
            const std::vector<std::vector<double>>& pose_cost, const std::vector<std::vector<char>>& allowed,
            bool allow_hold, std::vector<std::size_t>& path, std::vector<int>& edges_used, std::vector<char>& held) {
    (void)graph;
    const std::size_t T = pose_cost.size(), S = states.size();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> cost(T, std::vector<double>(S, kInf));
    std::vector<std::vector<long>> back(T, std::vector<long>(S, -1));
    std::vector<std::vector<int>> back_edge(T, std::vector<int>(S, -1));
    std::vector<std::vector<char>> back_hold(T, std::vector<char>(S, 0));
    for (std::size_t s = 0; s < S; ++s)
        if (allowed.empty() || allowed[0][s]) cost[0][s] = pose_cost[0][s];
    for (std::size_t t = 1; t < T; ++t)
        for (std::size_t s = 0; s < S; ++s) {
            if (!allowed.empty() && !allowed[t][s]) continue;
            double best = kInf;
            for (const Pred& p : preds[s]) {
                if (p.hold && !allow_hold) continue;
                const double c = cost[t - 1][p.state] + p.cost;
                if (c < best) {
                    best = c;
                    back[t][s] = static_cast<long>(p.state);
                    back_edge[t][s] = p.edge;
                    back_hold[t][s] = p.hold;
                }
            }
            if (best < kInf) cost[t][s] = best + pose_cost[t][s];
        }
    double best = kInf;
    long end = -1;
    for (std::size_t s = 0; s < S; ++s)
        if (cost[T - 1][s] < best) {
            best = cost[T - 1][s];
            end = static_cast<long>(s);
        }
    if (end < 0) return false;
    path.assign(T, 0);
    edges_used.assign(T, -1);
    held.assign(T, 0);
    long s = end;
    for (std::size_t t = T; t-- > 0;) {
        path[t] = static_cast<std::size_t>(s);
        if (t > 0) {
            edges_used[t] = back_edge[t][s];
            held[t] = back_hold[t][s];
            s = back[t][s];
        }
    }
    return true;
}

}  // namespace

SynthesisPlan plan_synthesis(const MotionGraph& graph, const Skeleton& skeleton,
                             const std::vector<SwingTwistPose>& target, const SynthesisParams& params,
                             Warnings* warnings) {
    params.validate();
    graph.validate();
    if (target.empty()) throw InvalidArgument("synthesis: target pose list is empty");
    if (graph.nodes.empty()) throw InvalidArgument("synthesis: motion graph is empty");

    std::vector<State> states;
    std::vector<std::size_t> node_start;
    for (std::size_t n = 0; n < graph.nodes.size(); ++n) {
        node_start.push_back(states.size());
        for (std::size_t i = 0; i < graph.nodes[n].frames.size(); ++i) states.push_back({n, i});
    }
    const std::size_t S = states.size(), T = target.size();

    // Predecessors in a fixed order: progression, incoming edges, hold.
    std::vector<std::vector<Pred>> preds(S);
    for (std::size_t s = 0; s < S; ++s) {
        const State& st = states[s];
        if (st.index > 0) preds[s].push_back({s - 1, 0.0, false, -1});
        else
            for (std::size_t e = 0; e < graph.edges.size(); ++e) {
                const MotionEdge& m = graph.edges[e];
                if (m.to != st.node) continue;
                const std::size_t last = node_start[m.from] + graph.nodes[m.from].frames.size() - 1;
                preds[s].push_back({last, params.lambda * m.cost, false, static_cast<int>(e)});
            }
        preds[s].push_back({s, 0.0, true, -1});
    }

    std::vector<std::vector<double>> pose_cost(T, std::vector<double>(S));
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t s = 0; s < S; ++s)
            pose_cost[t][s] = pose_distance(skeleton, graph.nodes[states[s].node].poses[states[s].index], target[t]);

    std::vector<std::size_t> path;
    std::vector<int> edges_used;
    std::vector<char> held;
    SynthesisPlan plan;
    plan.lambda = params.lambda;
    bool found = false;
    if (!params.exact && static_cast<std::size_t>(params.beam_width) < S) {
        std::vector<std::vector<char>> allowed(T, std::vector<char>(S, 0));
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<std::size_t> order(S);
            for (std::size_t s = 0; s < S; ++s) order[s] = s;
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return pose_cost[t][a] < pose_cost[t][b]; });
            for (int k = 0; k < params.beam_width; ++k) allowed[t][order[k]] = 1;
        }
        found = run_dp(graph, states, preds, pose_cost, allowed, false, path, edges_used, held);
    }
    if (found) {
        plan.exact = false;
    } else {
        plan.exact = true;
        found = run_dp(graph, states, preds, pose_cost, {}, false, path, edges_used, held);
        if (!found) {
            found = run_dp(graph, states, preds, pose_cost, {}, true, path, edges_used, held);
            if (warnings)
                warnings->push_back("synthesis: target of " + std::to_string(T) +
                                    " frames is not reachable through the graph; plan holds frames");
        }
    }

    for (std::size_t t = 0; t < T; ++t) {
        const State& st = states[path[t]];
        const MotionNode& node = graph.nodes[st.node];
        const SwingTwistPose& src = node.poses[st.index];
        PlanEntry e;
        e.node = st.node;
        e.index = st.index;
        e.frame = node.frames[st.index];
        e.pose_cost = pose_cost[t][path[t]];
        e.held = held[t];
        if (edges_used[t] >= 0) e.transition_cost = graph.edges[edges_used[t]].cost;
        e.delta_root_rotation = (target[t].root_rotation * src.root_rotation.conjugate()).normalized();
        e.delta_root_translation = target[t].root_translation - src.root_translation;
        for (std::size_t j = 0; j < src.joints.size(); ++j)
            e.delta_angles.push_back(target[t].joints[j].as_vector() - src.joints[j].as_vector());
        plan.total_cost += e.pose_cost + params.lambda * e.transition_cost;
        plan.entries.push_back(std::move(e));
    }
    // Blend directives after each transition.
    for (std::size_t t = 1; t < T; ++t) {
        if (edges_used[t] < 0) continue;
        const int window = graph.edges[edges_used[t]].blend_window;
        if (window < 2) continue;
        for (int k = 0; k < window && t + k < T; ++k) {
            if (k > 0 && edges_used[t + k] >= 0) break;
            PlanEntry& e = plan.entries[t + k];
            e.blended = true;
            e.blend_from = t - 1;
            e.blend_index = k;
            e.blend_window = window;
        }
    }
    return plan;
}

namespace {

SwingTwistPose target_from(const PlanEntry& e, const SwingTwistPose& src) {
    SwingTwistPose p = src;
    p.root_rotation = (e.delta_root_rotation * src.root_rotation).normalized();
    p.root_translation = src.root_translation + e.delta_root_translation;
    for (std::size_t j = 0; j < p.joints.size(); ++j)
        p.joints[j] = JointAngles::from_vector(src.joints[j].as_vector() + e.delta_angles[j]);
    return p;
}

}  // namespace

std::vector<TriMesh> realize_plan(const SynthesisPlan& plan, const MotionGraph& graph, const SkinnedModel& model,
                                  const std::map<std::size_t, GlueMap>& glues, const RegistrationParams& registration) {
    const auto& entries = plan.entries;
    const std::size_t T = entries.size();
    std::vector<SwingTwistPose> target(T);
    for (std::size_t t = 0; t < T; ++t) {
        const PlanEntry& e = entries[t];
        if (e.node >= graph.nodes.size() || e.index >= graph.nodes[e.node].frames.size())
            throw InvalidArgument("synthesis plan: entry " + std::to_string(t) + " references a missing graph frame");
        if (!glues.count(e.frame)) throw InvalidArgument("synthesis: no glue map for frame " + std::to_string(e.frame));
        target[t] = target_from(e, graph.nodes[e.node].poses[e.index]);
    }

    // Every entry is retargeted to its exact target pose.
    std::vector<TriMesh> meshes(T);
    for (std::size_t t = 0; t < T; ++t) meshes[t] = retarget(glues.at(entries[t].frame), model, target[t]);

    // Transition blending: register the new frame onto the previous node's
    // last frame (retargeted to the same target pose) and fade the difference
    // out over the window.
    for (std::size_t t = 1; t < T; ++t) {
        const PlanEntry& e = entries[t];
        if (!e.blended || e.blend_index != 0) continue;
        const TriMesh incoming = retarget(glues.at(entries[e.blend_from].frame), model, target[t]);
        const std::vector<TriMesh> fade = smooth_transition(meshes[t], incoming, e.blend_window, registration);
        const TriMesh& base = fade.front();
        for (int k = 0; k < e.blend_window && t + k < T; ++k) {
            const PlanEntry& ek = entries[t + k];
            if (!ek.blended || ek.blend_from != e.blend_from) break;
            const TriMesh& shaped = fade[e.blend_window - 1 - k];
            TriMesh& out = meshes[t + k];
            if (out.vertices.size() != base.vertices.size()) break;
            for (std::size_t v = 0; v < out.vertices.size(); ++v) out.vertices[v] += shaped.vertices[v] - base.vertices[v];
        }
    }
    return meshes;
}

SynthesisResult synthesize(const MotionGraph& graph, const SkinnedModel& model,
                           const std::map<std::size_t, GlueMap>& glues, const std::vector<SwingTwistPose>& target,
                           const SynthesisParams& params) {
    SynthesisResult result;
    result.plan = plan_synthesis(graph, model.skeleton, target, params, &result.warnings);
    result.meshes = realize_plan(result.plan, graph, model, glues, params.registration);
    return result;
}

}  // namespace vva
