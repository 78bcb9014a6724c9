#pragma once

#include "vva/mesh.hpp"

#include <Eigen/Core>

namespace vva {

struct GraphNode {
    Vec3 position = Vec3::Zero();  // rest position g
    Quat rotation = Quat::Identity();
    Vec3 translation = Vec3::Zero();
};

/// Embedded deformation graph bound to one mesh. Bindings are stored flat:
/// vertex v uses slots [v*k, v*k + k).
struct DeformationGraph {
    std::vector<GraphNode> nodes;
    std::vector<std::pair<int, int>> edges;  // undirected, (lo, hi), sorted
    int k = 4;
    std::vector<int> binding_nodes;
    std::vector<double> binding_weights;
    double node_spacing = 0.0;

    std::size_t num_bound_vertices() const { return k > 0 ? binding_nodes.size() / k : 0; }
    void reset_transforms();
    /// Node neighbor lists derived from `edges`.
    std::vector<std::vector<int>> adjacency() const;
};

/// Farthest-point node sampling seeded at vertex 0 (min pairwise node
/// distance >= spacing), K-nearest-node binding with weights
/// (1 - d/d_{K+1})^2, edges between nodes sharing a bound vertex. If the
/// node graph splits while the surface is connected, nearest-node pairs
/// across mesh edges are added until the components join.
DeformationGraph build_graph(const TriMesh& mesh, double node_spacing, int k = 4, Warnings* warnings = nullptr);

/// v' = sum_j w_j [R_j (v - g_j) + g_j + t_j]. Parallel over vertices;
/// identical to apply_deformation_serial.
TriMesh apply_deformation(const DeformationGraph& graph, const TriMesh& mesh);
TriMesh apply_deformation_serial(const DeformationGraph& graph, const TriMesh& mesh);
std::vector<Vec3> warp_points(const DeformationGraph& graph, const std::vector<Vec3>& rest);
std::vector<Vec3> warp_points_serial(const DeformationGraph& graph, const std::vector<Vec3>& rest);

/// Warp of a single point with explicit (node, weight) influences.
Vec3 warp_point(const DeformationGraph& graph, const Vec3& p, const int* nodes, const double* weights, int count);

/// Sum over undirected edges of both directed embedded-deformation terms
/// ||R_j (g_k - g_j) + g_j + t_j - (g_k + t_k)||^2.
double arap_energy(const DeformationGraph& graph);
/// Gradient of arap_energy with respect to node translations (3 per node).
Eigen::VectorXd arap_translation_gradient(const DeformationGraph& graph);

struct GraphHierarchy {
    std::vector<DeformationGraph> levels;  // coarse to fine
    /// prolongation[l] (l >= 1): per node of level l, influences over the
    /// nodes of level l-1; weights sum to 1. prolongation[0] is empty.
    std::vector<std::vector<std::vector<std::pair<int, double>>>> prolongation;
};

/// `levels` graphs with spacings finest * ratio^(levels-1-l).
GraphHierarchy build_hierarchy(const TriMesh& mesh, double finest_spacing, int levels = 3, double ratio = 2.0,
                               int k = 4, Warnings* warnings = nullptr);

/// Initializes level `level` from the solved graph of level - 1: rotations
/// by sign-aligned weighted quaternion averaging, translations by the coarse
/// warp of the fine node's rest position.
DeformationGraph refine_to_level(const GraphHierarchy& hierarchy, const DeformationGraph& coarse_solution, int level);

}  // namespace vva
