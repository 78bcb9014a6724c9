#include "vva/decimate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <queue>
#include <tuple>

namespace vva {

Quadric Quadric::plane(const Vec3& n, double d, double weight) {
    Eigen::Vector4d p(n.x(), n.y(), n.z(), d);
    Quadric q;
    q.m = weight * p * p.transpose();
    return q;
}

double Quadric::evaluate(const Vec3& p) const {
    const Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
    return h.dot(m * h);
}

VertexQuadrics compute_vertex_quadrics(const TriMesh& mesh) {
    VertexQuadrics out;
    out.quadrics.resize(mesh.vertices.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3 c = (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a);
        const double area = 0.5 * c.norm();
        if (area < kMinFaceArea) {
            out.skipped_faces.push_back(static_cast<int>(f));
            continue;
        }
        const Vec3 n = c.normalized();
        const Quadric q = Quadric::plane(n, -n.dot(a), area);
        for (int v : t) out.quadrics[v] += q;
    }
    return out;
}

Vec3 optimal_contraction_point(const Quadric& q, const Vec3& a, const Vec3& b) {
    const Mat3 A = q.m.topLeftCorner<3, 3>();
    const Vec3 rhs = -q.m.topRightCorner<3, 1>();
    Eigen::JacobiSVD<Mat3> svd(A);
    const Vec3 s = svd.singularValues();
    if (s[2] > 0.0 && s[0] / s[2] < 1e8) return A.ldlt().solve(rhs);
    const Vec3 candidates[] = {0.5 * (a + b), a, b};
    Vec3 best = candidates[0];
    double best_cost = q.evaluate(best);
    for (int i = 1; i < 3; ++i) {
        const double c = q.evaluate(candidates[i]);
        if (c < best_cost) {
            best_cost = c;
            best = candidates[i];
        }
    }
    return best;
}

namespace {

struct Entry {
    double cost;
    int lo, hi;
    unsigned vlo, vhi;  // vertex versions at push time
    bool operator>(const Entry& o) const { return std::tie(cost, lo, hi) > std::tie(o.cost, o.lo, o.hi); }
};

class Decimator {
public:
    Decimator(const TriMesh& mesh, const DecimationParams& params) : params_(params) {
        verts_ = mesh.vertices;
        faces_ = mesh.faces;
        face_alive_.assign(faces_.size(), 1);
        vert_alive_.assign(verts_.size(), 1);
        version_.assign(verts_.size(), 0);
        importance_.resize(verts_.size());
        for (std::size_t v = 0; v < verts_.size(); ++v) importance_[v] = mesh.importance_at(v);
        vf_ = vertex_faces(mesh);
        isolated_.resize(verts_.size());
        for (std::size_t v = 0; v < verts_.size(); ++v) isolated_[v] = vf_[v].empty();
        quadrics_ = compute_vertex_quadrics(mesh).quadrics;
        if (params.preserve_boundary) add_boundary_constraints(mesh);
        live_faces_ = faces_.size();
    }

    std::size_t live_faces() const { return live_faces_; }

    void run(std::vector<Collapse>& log) {
        for (std::size_t v = 0; v < verts_.size(); ++v) push_edges_of(static_cast<int>(v), true);
        while (live_faces_ > params_.target_faces && !heap_.empty()) {
            if (params_.max_collapses && log.size() >= params_.max_collapses) break;
            const Entry e = heap_.top();
            heap_.pop();
            if (!vert_alive_[e.lo] || !vert_alive_[e.hi] || version_[e.lo] != e.vlo || version_[e.hi] != e.vhi) continue;
            Vec3 target;
            double cost;
            evaluate(e.lo, e.hi, target, cost);
            if (!valid(e.lo, e.hi, target)) continue;
            collapse(e.lo, e.hi, target);
            log.push_back({e.lo, e.hi, target, cost});
        }
    }

    TriMesh compact(const TriMesh& original) const {
        TriMesh out;
        std::vector<int> remap(verts_.size(), -1);
        // Keep only vertices that still carry faces, plus originally isolated ones.
        std::vector<char> used(verts_.size(), 0);
        for (std::size_t f = 0; f < faces_.size(); ++f)
            if (face_alive_[f])
                for (int v : faces_[f]) used[v] = 1;
        for (std::size_t v = 0; v < verts_.size(); ++v) {
            if (!vert_alive_[v] || (!used[v] && !vf_original_empty(v))) continue;
            remap[v] = static_cast<int>(out.vertices.size());
            out.vertices.push_back(verts_[v]);
            if (!original.importance.empty()) out.importance.push_back(importance_[v]);
            if (!original.uv.empty()) out.uv.push_back(original.uv[v]);
        }
        for (std::size_t f = 0; f < faces_.size(); ++f)
            if (face_alive_[f]) out.faces.push_back({remap[faces_[f][0]], remap[faces_[f][1]], remap[faces_[f][2]]});
        return out;
    }

private:
    bool vf_original_empty(std::size_t v) const { return isolated_[v]; }

    void add_boundary_constraints(const TriMesh& mesh) {
        const EdgeTopology topo = build_edge_topology(mesh);
        on_boundary_.assign(verts_.size(), 0);
        for (std::size_t e = 0; e < topo.edges.size(); ++e) {
            if (topo.edge_faces[e].size() != 1) continue;
            const auto [a, b] = topo.edges[e];
            on_boundary_[a] = on_boundary_[b] = 1;
            const Vec3 n = face_normal(mesh, topo.edge_faces[e][0]);
            const Vec3 dir = verts_[b] - verts_[a];
            const Vec3 m = dir.cross(n);
            if (m.norm() == 0.0) continue;
            const Vec3 mu = m.normalized();
            const Quadric q = Quadric::plane(mu, -mu.dot(verts_[a]), kBoundaryConstraintWeight * dir.squaredNorm());
            quadrics_[a] += q;
            quadrics_[b] += q;
        }
    }

    std::vector<int> neighbors(int v) const {
        std::vector<int> n;
        for (int f : vf_[v])
            for (int u : faces_[f])
                if (u != v) n.push_back(u);
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
        return n;
    }

    void evaluate(int a, int b, Vec3& target, double& cost) const {
        const Quadric q = quadrics_[a] + quadrics_[b];
        target = optimal_contraction_point(q, verts_[a], verts_[b]);
        const double mean_imp = 0.5 * (importance_[a] + importance_[b]);
        cost = std::max(0.0, q.evaluate(target)) * std::pow(mean_imp, params_.importance_exponent);
    }

    void push_edges_of(int v, bool only_higher) {
        for (int u : neighbors(v)) {
            if (only_higher && u < v) continue;
            const int lo = std::min(u, v), hi = std::max(u, v);
            Vec3 t;
            double c;
            evaluate(lo, hi, t, c);
            heap_.push({c, lo, hi, version_[lo], version_[hi]});
        }
    }

    bool valid(int a, int b, const Vec3& target) const {
        // Faces on the edge.
        std::vector<int> shared;
        for (int f : vf_[a]) {
            const Face& t = faces_[f];
            if (t[0] == b || t[1] == b || t[2] == b) shared.push_back(f);
        }
        if (shared.empty() || shared.size() > 2) return false;
        // Link condition.
        const std::vector<int> na = neighbors(a), nb = neighbors(b);
        std::vector<int> common;
        std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
        if (common.size() != shared.size()) return false;
        if (!on_boundary_.empty()) {
            // An interior edge joining two boundary vertices would pinch the surface.
            if (shared.size() == 2 && on_boundary_[a] && on_boundary_[b]) return false;
        }
        // Surviving faces: orientation, area and uniqueness.
        std::vector<std::array<int, 3>> keys;
        for (int v : {a, b}) {
            for (int f : vf_[v]) {
                if (std::find(shared.begin(), shared.end(), f) != shared.end()) continue;
                Face t = faces_[f];
                const Vec3 n_old = (verts_[t[1]] - verts_[t[0]]).cross(verts_[t[2]] - verts_[t[0]]);
                std::array<Vec3, 3> p{verts_[t[0]], verts_[t[1]], verts_[t[2]]};
                for (int k = 0; k < 3; ++k)
                    if (t[k] == a || t[k] == b) {
                        p[k] = target;
                        t[k] = a;
                    }
                const Vec3 n_new = (p[1] - p[0]).cross(p[2] - p[0]);
                if (0.5 * n_new.norm() < kMinFaceArea) return false;
                if (n_new.dot(n_old) < 0.0) return false;
                std::array<int, 3> key{t[0], t[1], t[2]};
                std::sort(key.begin(), key.end());
                keys.push_back(key);
            }
        }
        std::sort(keys.begin(), keys.end());
        return std::adjacent_find(keys.begin(), keys.end()) == keys.end();
    }

    void collapse(int a, int b, const Vec3& target) {
        verts_[a] = target;
        quadrics_[a] += quadrics_[b];
        importance_[a] = std::max(importance_[a], importance_[b]);
        if (!on_boundary_.empty()) on_boundary_[a] = on_boundary_[a] || on_boundary_[b];
        vert_alive_[b] = 0;
        std::vector<int> merged;
        for (int f : vf_[a]) merged.push_back(f);
        for (int f : vf_[b]) {
            Face& t = faces_[f];
            const bool has_a = t[0] == a || t[1] == a || t[2] == a;
            if (has_a) {
                face_alive_[f] = 0;
                --live_faces_;
                continue;
            }
            for (int& v : t)
                if (v == b) v = a;
            merged.push_back(f);
        }
        std::vector<int> kept;
        for (int f : merged)
            if (face_alive_[f]) kept.push_back(f);
        std::sort(kept.begin(), kept.end());
        kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
        // Remove dead faces from the neighbors' incidence lists.
        for (int f : vf_[b]) {
            if (face_alive_[f]) continue;
            for (int v : faces_[f]) {
                if (v == a || v == b) continue;
                auto& list = vf_[v];
                list.erase(std::remove(list.begin(), list.end(), f), list.end());
            }
        }
        vf_[a] = std::move(kept);
        vf_[b].clear();

        const std::vector<int> ring = neighbors(a);
        ++version_[a];
        for (int u : ring) ++version_[u];
        push_edges_of(a, false);
        for (int u : ring) push_edges_of(u, false);
    }

    const DecimationParams& params_;
    std::vector<Vec3> verts_;
    std::vector<Face> faces_;
    std::vector<char> face_alive_, vert_alive_, on_boundary_, isolated_;
    std::vector<unsigned> version_;
    std::vector<double> importance_;
    std::vector<std::vector<int>> vf_;
    std::vector<Quadric> quadrics_;
    std::size_t live_faces_ = 0;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap_;
};

}  // namespace

DecimationResult decimate(const TriMesh& mesh, const DecimationParams& params) {
    if (params.target_faces < 4) throw InvalidArgument("decimate: target_faces must be at least 4");
    if (!(params.importance_exponent >= 0.0)) throw InvalidArgument("decimate: importance_exponent must be >= 0");
    validate_mesh(mesh);
    DecimationResult result;
    if (params.target_faces >= mesh.faces.size()) {
        result.mesh = mesh;
        return result;
    }
    Decimator d(mesh, params);
    d.run(result.collapses);
    result.mesh = d.compact(mesh);
    if (d.live_faces() > params.target_faces && !(params.max_collapses && result.collapses.size() >= params.max_collapses))
        result.warnings.push_back("decimate: target of " + std::to_string(params.target_faces) +
                                  " faces not reachable; stopped at " + std::to_string(d.live_faces()));
    return result;
}

}  // namespace vva
