#include "vva/geometry.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace vva {

double surface_area(const TriMesh& mesh) {
    double area = 0.0;
    for (const Face& t : mesh.faces) area += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    return area;
}

namespace {

// Number of edge-connected fans among the faces incident to vertex v.
int fan_count(int v, const std::vector<int>& faces, const std::vector<Face>& all) {
    const int n = static_cast<int>(faces.size());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::map<int, int> first_owner;  // other vertex of an edge (v, w) -> a face index
    for (int i = 0; i < n; ++i) {
        for (int w : all[faces[i]]) {
            if (w == v) continue;
            auto [it, inserted] = first_owner.try_emplace(w, i);
            if (!inserted) {
                const int a = root(i), b = root(it->second);
                if (a != b) parent[a] = b;
            }
        }
    }
    int fans = 0;
    for (int i = 0; i < n; ++i)
        if (root(i) == i) ++fans;
    return fans;
}

}  // namespace

std::vector<ComponentGenus> genus_per_component(const TriMesh& mesh) {
    const auto [comp, ncomp] = vertex_components(mesh);
    const EdgeTopology topo = build_edge_topology(mesh);
    const auto vf = vertex_faces(mesh);

    std::vector<ComponentGenus> info(ncomp);
    std::vector<char> used(ncomp, 0);
    for (int c = 0; c < ncomp; ++c) info[c].component = c;
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (vf[v].empty()) continue;
        ComponentGenus& g = info[comp[v]];
        used[comp[v]] = 1;
        ++g.vertices;
        if (fan_count(static_cast<int>(v), vf[v], mesh.faces) != 1) g.topology = ComponentTopology::NonManifold;
    }
    for (const Face& t : mesh.faces) ++info[comp[t[0]]].faces;
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
        ComponentGenus& g = info[comp[topo.edges[e].first]];
        ++g.edges;
        const std::size_t valence = topo.edge_faces[e].size();
        if (valence > 2) g.topology = ComponentTopology::NonManifold;
        else if (valence == 1 && g.topology == ComponentTopology::ClosedManifold) g.topology = ComponentTopology::Open;
    }

    std::vector<ComponentGenus> out;
    for (int c = 0; c < ncomp; ++c) {
        if (!used[c]) continue;
        ComponentGenus g = info[c];
        g.component = static_cast<int>(out.size());
        if (g.topology == ComponentTopology::ClosedManifold) {
            const int chi = g.vertices - g.edges + g.faces;
            g.genus = (2 - chi) / 2;
        }
        out.push_back(g);
    }
    return out;
}

double closest_point_sq(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, Vec3& point, Vec3& bary) {
    // Voronoi-region walk over vertices, edges and the face interior.
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) {
        point = a;
        bary = Vec3(1, 0, 0);
        return (p - point).squaredNorm();
    }
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) {
        point = b;
        bary = Vec3(0, 1, 0);
        return (p - point).squaredNorm();
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        point = a + v * ab;
        bary = Vec3(1 - v, v, 0);
        return (p - point).squaredNorm();
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) {
        point = c;
        bary = Vec3(0, 0, 1);
        return (p - point).squaredNorm();
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        point = a + w * ac;
        bary = Vec3(1 - w, 0, w);
        return (p - point).squaredNorm();
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        point = b + w * (c - b);
        bary = Vec3(0, 1 - w, w);
        return (p - point).squaredNorm();
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    point = a + ab * v + ac * w;
    bary = Vec3(1 - v - w, v, w);
    return (p - point).squaredNorm();
}

TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 n = (b - a).cross(c - a);
    const double len = n.norm();
    if (!(0.5 * len >= kMinFaceArea)) throw InvalidArgument("closest_point_on_triangle: degenerate triangle");
    TrianglePoint out;
    closest_point_sq(p, a, b, c, out.point, out.bary);
    out.signed_distance = (p - out.point).dot(n / len);
    return out;
}

}  // namespace vva
