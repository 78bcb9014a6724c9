#include "vva/laplacian.hpp"

namespace vva {

CotanLaplacian cotangent_laplacian(const TriMesh& mesh) {
    const EdgeTopology topo = build_edge_topology(mesh);
    if (topo.max_edge_valence() > 2) {
        for (std::size_t e = 0; e < topo.edges.size(); ++e)
            if (topo.edge_faces[e].size() > 2)
                throw ValidationError("cotangent_laplacian: edge (" + std::to_string(topo.edges[e].first) + "," +
                                      std::to_string(topo.edges[e].second) + ") has " +
                                      std::to_string(topo.edge_faces[e].size()) + " incident faces");
    }

    std::vector<double> weight(topo.edges.size(), 0.0);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            // Angle at corner k is opposite edge k.
            const Vec3& o = mesh.vertices[t[k]];
            const Vec3 u = mesh.vertices[t[(k + 1) % 3]] - o;
            const Vec3 v = mesh.vertices[t[(k + 2) % 3]] - o;
            const double cross = u.cross(v).norm();
            if (cross <= 0.0) continue;
            weight[topo.face_edges[f][k]] += 0.5 * u.dot(v) / cross;
        }
    }

    CotanLaplacian out;
    const int n = static_cast<int>(mesh.vertices.size());
    std::vector<double> diag(n, 0.0);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(topo.edges.size() * 2 + n);
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
        double w = weight[e];
        if (w < 0.0) {
            w = 0.0;
            ++out.clamped_edges;
        }
        const auto [i, j] = topo.edges[e];
        triplets.emplace_back(i, j, -w);
        triplets.emplace_back(j, i, -w);
        diag[i] += w;
        diag[j] += w;
    }
    for (int i = 0; i < n; ++i) triplets.emplace_back(i, i, diag[i]);
    out.matrix.resize(n, n);
    out.matrix.setFromTriplets(triplets.begin(), triplets.end());
    return out;
}

}  // namespace vva
