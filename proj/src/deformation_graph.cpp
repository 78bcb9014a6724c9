#include "vva/deformation_graph.hpp"

#include "vva/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vva {

void DeformationGraph::reset_transforms() {
    for (GraphNode& n : nodes) {
        n.rotation = Quat::Identity();
        n.translation = Vec3::Zero();
    }
}

std::vector<std::vector<int>> DeformationGraph::adjacency() const {
    std::vector<std::vector<int>> adj(nodes.size());
    for (const auto& [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& l : adj) std::sort(l.begin(), l.end());
    return adj;
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (a > b) std::swap(a, b);
        parent[b] = a;
        return true;
    }
};

// Falloff weights for the first `count` of `nearest` (sorted), normalized
// against the next distance.
void falloff_weights(const std::vector<std::pair<int, double>>& nearest, int count, double* out) {
    double dmax;
    if (static_cast<int>(nearest.size()) > count) {
        dmax = nearest[count].second;
    } else {
        dmax = nearest.back().second * (1.0 + 1e-6) + 1e-12;
    }
    double sum = 0.0;
    for (int i = 0; i < count; ++i) {
        const double r = dmax > 0.0 ? 1.0 - nearest[i].second / dmax : 0.0;
        out[i] = r * r;
        sum += out[i];
    }
    if (sum <= 0.0) {
        for (int i = 0; i < count; ++i) out[i] = 1.0 / count;
        return;
    }
    for (int i = 0; i < count; ++i) out[i] /= sum;
}

std::vector<int> farthest_point_sample(const std::vector<Vec3>& points, double spacing) {
    std::vector<int> chosen{0};
    std::vector<double> dist(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) dist[i] = (points[i] - points[0]).norm();
    while (true) {
        int best = -1;
        double best_d = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i)
            if (dist[i] > best_d) {
                best_d = dist[i];
                best = static_cast<int>(i);
            }
        if (best < 0 || best_d < spacing) break;
        chosen.push_back(best);
        const Vec3& c = points[best];
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double d = (points[i] - c).norm();
            if (d < dist[i]) dist[i] = d;
        }
    }
    return chosen;
}

}  // namespace

DeformationGraph build_graph(const TriMesh& mesh, double node_spacing, int k, Warnings* warnings) {
    if (!(node_spacing > 0.0)) throw InvalidArgument("build_graph: node spacing must be positive");
    if (k < 1) throw InvalidArgument("build_graph: K must be at least 1");
    if (mesh.vertices.empty()) throw InvalidArgument("build_graph: mesh has no vertices");

    DeformationGraph g;
    g.node_spacing = node_spacing;
    const double diag = bounding_box(mesh).diagonal();
    std::vector<int> samples;
    if (node_spacing > diag) {
        samples = {0};
        if (warnings)
            warnings->push_back("build_graph: spacing exceeds the bounding-box diagonal; using a single node");
    } else {
        samples = farthest_point_sample(mesh.vertices, node_spacing);
    }
    std::vector<Vec3> node_pos;
    for (int s : samples) {
        GraphNode n;
        n.position = mesh.vertices[s];
        g.nodes.push_back(n);
        node_pos.push_back(n.position);
    }
    const PointIndex tree(node_pos);
    g.k = std::min<int>(k, static_cast<int>(g.nodes.size()));
    const std::size_t nv = mesh.vertices.size();
    g.binding_nodes.resize(nv * g.k);
    g.binding_weights.resize(nv * g.k);
    for (std::size_t v = 0; v < nv; ++v) {
        const auto nearest = tree.k_nearest(mesh.vertices[v], g.k + 1);
        for (int i = 0; i < g.k; ++i) g.binding_nodes[v * g.k + i] = nearest[i].first;
        falloff_weights(nearest, g.k, &g.binding_weights[v * g.k]);
    }

    std::vector<std::pair<int, int>> edges;
    for (std::size_t v = 0; v < nv; ++v)
        for (int i = 0; i < g.k; ++i)
            for (int j = i + 1; j < g.k; ++j) {
                const int a = g.binding_nodes[v * g.k + i], b = g.binding_nodes[v * g.k + j];
                if (a != b) edges.emplace_back(std::min(a, b), std::max(a, b));
            }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    // Connectivity repair across mesh edges.
    UnionFind uf(g.nodes.size());
    for (const auto& [a, b] : edges) uf.unite(a, b);
    std::vector<std::pair<int, int>> candidates;
    for (const Face& f : mesh.faces)
        for (int e = 0; e < 3; ++e) {
            const int a = g.binding_nodes[f[e] * g.k], b = g.binding_nodes[f[(e + 1) % 3] * g.k];
            if (a != b) candidates.emplace_back(std::min(a, b), std::max(a, b));
        }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    bool added = false;
    for (const auto& [a, b] : candidates)
        if (uf.unite(a, b)) {
            edges.emplace_back(a, b);
            added = true;
        }
    if (added) std::sort(edges.begin(), edges.end());
    g.edges = std::move(edges);
    return g;
}

namespace {

// R - I per node. The warp is evaluated in displacement form,
// p + sum_j w_j [(R_j - I)(p - g_j) + t_j], so identity transforms map points
// exactly.
struct NodeFrames {
    std::vector<Mat3> spin;
    explicit NodeFrames(const DeformationGraph& g) : spin(g.nodes.size()) {
        for (std::size_t j = 0; j < g.nodes.size(); ++j)
            spin[j] = g.nodes[j].rotation.toRotationMatrix() - Mat3::Identity();
    }
};

inline Vec3 warp_with(const DeformationGraph& g, const NodeFrames& f, const Vec3& p, const int* nodes,
                      const double* weights, int count) {
    Vec3 d = Vec3::Zero();
    for (int i = 0; i < count; ++i) {
        const GraphNode& n = g.nodes[nodes[i]];
        d += weights[i] * (f.spin[nodes[i]] * (p - n.position) + n.translation);
    }
    return p + d;
}

void check_binding(const DeformationGraph& g, std::size_t count) {
    if (g.num_bound_vertices() != count)
        throw InvalidArgument("apply_deformation: graph binds " + std::to_string(g.num_bound_vertices()) +
                              " vertices, mesh has " + std::to_string(count));
}

}  // namespace

Vec3 warp_point(const DeformationGraph& graph, const Vec3& p, const int* nodes, const double* weights, int count) {
    Vec3 d = Vec3::Zero();
    for (int i = 0; i < count; ++i) {
        const GraphNode& n = graph.nodes[nodes[i]];
        d += weights[i] * (n.rotation * (p - n.position) - (p - n.position) + n.translation);
    }
    return p + d;
}

std::vector<Vec3> warp_points(const DeformationGraph& graph, const std::vector<Vec3>& rest) {
    check_binding(graph, rest.size());
    const NodeFrames frames(graph);
    std::vector<Vec3> out(rest.size());
    const long long n = static_cast<long long>(rest.size());
    const int k = graph.k;
#pragma omp parallel for schedule(static)
    for (long long v = 0; v < n; ++v)
        out[v] = warp_with(graph, frames, rest[v], &graph.binding_nodes[v * k], &graph.binding_weights[v * k], k);
    return out;
}

std::vector<Vec3> warp_points_serial(const DeformationGraph& graph, const std::vector<Vec3>& rest) {
    check_binding(graph, rest.size());
    const NodeFrames frames(graph);
    std::vector<Vec3> out(rest.size());
    const int k = graph.k;
    for (std::size_t v = 0; v < rest.size(); ++v)
        out[v] = warp_with(graph, frames, rest[v], &graph.binding_nodes[v * k], &graph.binding_weights[v * k], k);
    return out;
}

TriMesh apply_deformation(const DeformationGraph& graph, const TriMesh& mesh) {
    TriMesh out = mesh;
    out.vertices = warp_points(graph, mesh.vertices);
    return out;
}

TriMesh apply_deformation_serial(const DeformationGraph& graph, const TriMesh& mesh) {
    TriMesh out = mesh;
    out.vertices = warp_points_serial(graph, mesh.vertices);
    return out;
}

double arap_energy(const DeformationGraph& graph) {
    const NodeFrames f(graph);
    double e = 0.0;
    for (const auto& [a, b] : graph.edges) {
        for (int dir = 0; dir < 2; ++dir) {
            const int j = dir == 0 ? a : b, k = dir == 0 ? b : a;
            const GraphNode& nj = graph.nodes[j];
            const GraphNode& nk = graph.nodes[k];
            const Vec3 r = f.spin[j] * (nk.position - nj.position) + nj.translation - nk.translation;
            e += r.squaredNorm();
        }
    }
    return e;
}

Eigen::VectorXd arap_translation_gradient(const DeformationGraph& graph) {
    const NodeFrames f(graph);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(3 * graph.nodes.size());
    for (const auto& [a, b] : graph.edges) {
        for (int dir = 0; dir < 2; ++dir) {
            const int j = dir == 0 ? a : b, k = dir == 0 ? b : a;
            const GraphNode& nj = graph.nodes[j];
            const GraphNode& nk = graph.nodes[k];
            const Vec3 r = f.spin[j] * (nk.position - nj.position) + nj.translation - nk.translation;
            grad.segment<3>(3 * j) += 2.0 * r;
            grad.segment<3>(3 * k) -= 2.0 * r;
        }
    }
    return grad;
}

GraphHierarchy build_hierarchy(const TriMesh& mesh, double finest_spacing, int levels, double ratio, int k,
                               Warnings* warnings) {
    if (levels < 1) throw InvalidArgument("build_hierarchy: need at least one level");
    if (!(ratio > 1.0)) throw InvalidArgument("build_hierarchy: spacing ratio must exceed 1");
    GraphHierarchy h;
    for (int l = 0; l < levels; ++l) {
        const double spacing = finest_spacing * std::pow(ratio, levels - 1 - l);
        h.levels.push_back(build_graph(mesh, spacing, k, warnings));
    }
    h.prolongation.resize(levels);
    for (int l = 1; l < levels; ++l) {
        std::vector<Vec3> coarse_pos;
        for (const GraphNode& n : h.levels[l - 1].nodes) coarse_pos.push_back(n.position);
        const PointIndex tree(coarse_pos);
        const int kk = std::min<int>(k, static_cast<int>(coarse_pos.size()));
        auto& prol = h.prolongation[l];
        for (const GraphNode& n : h.levels[l].nodes) {
            const auto nearest = tree.k_nearest(n.position, kk + 1);
            std::vector<double> w(kk);
            falloff_weights(nearest, kk, w.data());
            std::vector<std::pair<int, double>> row;
            for (int i = 0; i < kk; ++i) row.emplace_back(nearest[i].first, w[i]);
            prol.push_back(std::move(row));
        }
    }
    return h;
}

DeformationGraph refine_to_level(const GraphHierarchy& hierarchy, const DeformationGraph& coarse_solution, int level) {
    if (level < 1 || level >= static_cast<int>(hierarchy.levels.size()))
        throw InvalidArgument("refine_to_level: level " + std::to_string(level) + " out of range");
    if (coarse_solution.nodes.size() != hierarchy.levels[level - 1].nodes.size())
        throw InvalidArgument("refine_to_level: coarse solution does not match level " + std::to_string(level - 1));
    DeformationGraph fine = hierarchy.levels[level];
    const auto& prol = hierarchy.prolongation[level];
    for (std::size_t i = 0; i < fine.nodes.size(); ++i) {
        const auto& row = prol[i];
        std::size_t heaviest = 0;
        for (std::size_t r = 1; r < row.size(); ++r)
            if (row[r].second > row[heaviest].second) heaviest = r;
        const Quat& ref = coarse_solution.nodes[row[heaviest].first].rotation;
        Eigen::Vector4d acc = Eigen::Vector4d::Zero();
        std::vector<int> ids;
        std::vector<double> ws;
        for (const auto& [node, w] : row) {
            const Quat& q = coarse_solution.nodes[node].rotation;
            const double s = q.coeffs().dot(ref.coeffs()) < 0.0 ? -1.0 : 1.0;
            acc += s * w * q.coeffs();
            ids.push_back(node);
            ws.push_back(w);
        }
        Quat avg;
        avg.coeffs() = acc.normalized();
        GraphNode& n = fine.nodes[i];
        n.rotation = avg;
        n.translation = warp_point(coarse_solution, n.position, ids.data(), ws.data(), static_cast<int>(ids.size())) -
                        n.position;
    }
    return fine;
}

}  // namespace vva
