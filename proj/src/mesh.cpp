#include "vva/mesh.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace vva {

namespace {

std::string list_ids(const std::vector<std::size_t>& ids) {
    std::ostringstream os;
    const std::size_t shown = std::min<std::size_t>(ids.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) os << (i ? "," : "") << ids[i];
    if (ids.size() > shown) os << ",... (" << ids.size() << " total)";
    return os.str();
}

int find_root(std::vector<int>& parent, int x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

}  // namespace

std::string MeshValidation::describe() const {
    std::ostringstream os;
    if (!out_of_range_faces.empty()) os << "faces with out-of-range vertex index: " << list_ids(out_of_range_faces) << "; ";
    if (!repeated_vertex_faces.empty()) os << "faces repeating a vertex: " << list_ids(repeated_vertex_faces) << "; ";
    if (!degenerate_faces.empty()) os << "degenerate faces (area < 1e-12): " << list_ids(degenerate_faces) << "; ";
    if (bad_attribute_sizes) os << "importance/uv size does not match vertex count; ";
    std::string s = os.str();
    if (s.size() >= 2) s.resize(s.size() - 2);
    return s;
}

MeshValidation check_mesh(const TriMesh& mesh) {
    MeshValidation report;
    const auto nv = static_cast<long long>(mesh.vertices.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        bool in_range = true;
        for (int c : t)
            if (c < 0 || c >= nv) in_range = false;
        if (!in_range) {
            report.out_of_range_faces.push_back(f);
            continue;
        }
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
            report.repeated_vertex_faces.push_back(f);
            continue;
        }
        if (triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]) < kMinFaceArea)
            report.degenerate_faces.push_back(f);
    }
    if (!mesh.importance.empty() && mesh.importance.size() != mesh.vertices.size()) report.bad_attribute_sizes = true;
    if (!mesh.uv.empty() && mesh.uv.size() != mesh.vertices.size()) report.bad_attribute_sizes = true;
    return report;
}

void validate_mesh(const TriMesh& mesh) {
    const MeshValidation report = check_mesh(mesh);
    if (!report.ok()) throw ValidationError(report.describe());
}

BBox bounding_box(const std::vector<Vec3>& points) {
    BBox box;
    for (const Vec3& p : points) box.extend(p);
    return box;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

Vec3 face_normal(const TriMesh& mesh, std::size_t f) {
    const Face& t = mesh.faces[f];
    const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

std::vector<Vec3> face_normals(const TriMesh& mesh) {
    std::vector<Vec3> normals(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) normals[f] = face_normal(mesh, f);
    return normals;
}

std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
    std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
    for (const Face& t : mesh.faces) {
        // Unnormalized cross product is already area-weighted.
        const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        for (int c : t) normals[c] += n;
    }
    for (Vec3& n : normals) {
        const double len = n.norm();
        if (len > 0.0) n /= len;
    }
    return normals;
}

std::size_t EdgeTopology::max_edge_valence() const {
    std::size_t m = 0;
    for (const auto& f : edge_faces) m = std::max(m, f.size());
    return m;
}

EdgeTopology build_edge_topology(const TriMesh& mesh) {
    EdgeTopology topo;
    std::unordered_map<std::uint64_t, int> lookup;
    lookup.reserve(mesh.faces.size() * 2);
    topo.face_edges.resize(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            int a = t[(k + 1) % 3];
            int b = t[(k + 2) % 3];
            if (a > b) std::swap(a, b);
            const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
            auto [it, inserted] = lookup.try_emplace(key, static_cast<int>(topo.edges.size()));
            if (inserted) {
                topo.edges.emplace_back(a, b);
                topo.edge_faces.emplace_back();
            }
            topo.face_edges[f][k] = it->second;
            topo.edge_faces[it->second].push_back(static_cast<int>(f));
        }
    }
    return topo;
}

std::vector<std::vector<int>> vertex_faces(const TriMesh& mesh) {
    std::vector<std::vector<int>> vf(mesh.vertices.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        for (int c : mesh.faces[f]) vf[c].push_back(static_cast<int>(f));
    return vf;
}

std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh) {
    std::vector<std::vector<int>> nb(mesh.vertices.size());
    for (const Face& t : mesh.faces)
        for (int k = 0; k < 3; ++k) {
            nb[t[k]].push_back(t[(k + 1) % 3]);
            nb[t[k]].push_back(t[(k + 2) % 3]);
        }
    for (auto& n : nb) {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    return nb;
}

std::pair<std::vector<int>, int> vertex_components(const TriMesh& mesh) {
    const int n = static_cast<int>(mesh.vertices.size());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    for (const Face& t : mesh.faces) {
        const int r0 = find_root(parent, t[0]);
        for (int k = 1; k < 3; ++k) {
            const int r = find_root(parent, t[k]);
            if (r != r0) parent[std::max(r, r0)] = std::min(r, r0);
        }
    }
    // Relabel in order of first appearance so ids are deterministic.
    std::vector<int> label(n, -1), comp(n);
    int count = 0;
    for (int v = 0; v < n; ++v) {
        const int r = find_root(parent, v);
        if (label[r] < 0) label[r] = count++;
        comp[v] = label[r];
    }
    return {comp, count};
}

void validate_groups(const std::vector<FrameGroup>& groups, std::size_t frame_count) {
    std::size_t expected = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const FrameGroup& grp = groups[g];
        if (grp.first != expected || grp.last < grp.first)
            throw ValidationError("group " + std::to_string(g) + " does not continue the frame partition");
        if (grp.keyframe < grp.first || grp.keyframe > grp.last)
            throw ValidationError("keyframe of group " + std::to_string(g) + " lies outside its range");
        expected = grp.last + 1;
    }
    if (expected != frame_count) throw ValidationError("groups do not cover all frames");
}

TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& translation) {
    TriMesh out = mesh;
    for (Vec3& v : out.vertices) v = rotation * v + translation;
    return out;
}

}  // namespace vva
