#pragma once

#include "vva/deformation_graph.hpp"
#include "vva/spatial_index.hpp"

#include <Eigen/Core>

namespace vva {

struct RegistrationParams {
    int levels = 3;
    int iters_per_level = 8;
    double max_corr_dist = 0.0;     // meters; <= 0 means 5% of the target bbox diagonal
    double max_normal_angle = 60.0;  // degrees
    double arap_weight = 2.0;  // at the coarsest level, halved per finer level
    double point_to_plane_weight = 1.0;
    double node_spacing = 0.0;  // finest level; <= 0 means 2.5% of the source bbox diagonal
    int nodes_per_vertex = 4;
    double level_spacing_ratio = 2.0;
    /// Coarser levels widen the correspondence gate by this factor per level.
    double coarse_gate_scale = 2.0;
    /// Closed-form rigid alignment (bidirectional ICP) before the non-rigid stages.
    bool rigid_prealign = true;

    void validate() const;
};

struct CorrespondenceGates {
    double max_distance = 0.0;
    double max_normal_angle = 60.0;  // degrees
};

/// One data-term constraint. Forward: source vertex -> target surface.
/// Reverse: target vertex -> deformed source surface (face + barycentric).
struct Correspondence {
    enum class Direction { Forward, Reverse };
    Direction direction = Direction::Forward;
    int source_vertex = -1;  // forward
    int source_face = -1;    // reverse
    Vec3 source_bary = Vec3::Zero();
    int target_vertex = -1;  // reverse
    int target_face = -1;    // forward
    Vec3 target_point = Vec3::Zero();
    Vec3 target_normal = Vec3::UnitZ();
    double distance = 0.0;
    double weight = 1.0;
};

/// Bidirectional closest-point correspondences between the current deformed
/// source and the target, pruned by the distance and normal-angle gates.
/// `stride` > 1 keeps every stride-th vertex of each side.
std::vector<Correspondence> find_correspondences(const TriMesh& deformed_source, const TriMesh& target,
                                                 const SpatialIndex& target_index, const CorrespondenceGates& gates,
                                                 int stride = 1);

/// Point-to-plane residuals n . (p(x) - q) of the correspondences for the
/// graph bound to `rest_source`, and their Jacobian with respect to the
/// per-node increments (omega_j, dt_j) (6 columns per node, rotation
/// increment left-multiplied). Dense; intended for small problems and tests.
Eigen::VectorXd data_residuals(const DeformationGraph& graph, const TriMesh& rest_source,
                               const std::vector<Correspondence>& corrs);
Eigen::MatrixXd data_jacobian(const DeformationGraph& graph, const TriMesh& rest_source,
                              const std::vector<Correspondence>& corrs);

/// R_j <- exp(omega_j) R_j, t_j <- t_j + dt_j; rotations renormalized.
void apply_increment(DeformationGraph& graph, const Eigen::VectorXd& delta);

struct SolverStep {
    double energy_before = 0.0;  // with the iteration's correspondences held fixed
    double energy_after = 0.0;
};

struct LevelTrace {
    int level = 0;
    int nodes = 0;
    double node_spacing = 0.0;
    double gate = 0.0;
    double arap_weight = 0.0;
    int iterations = 0;
    std::vector<double> energies;  // energy at the start of each iteration
    std::vector<SolverStep> steps;  // accepted steps
    std::size_t correspondences = 0;  // in the last iteration
};

struct RegistrationResult {
    TriMesh deformed_source;
    DeformationGraph graph;  // solved finest level
    Mat3 rigid_rotation = Mat3::Identity();
    Vec3 rigid_translation = Vec3::Zero();
    double error = 0.0;  // symmetric RMS point-to-surface distance
    int iterations_used = 0;
    bool converged = true;
    std::vector<LevelTrace> levels;
    Warnings warnings;
};

RegistrationResult register_meshes(const TriMesh& source, const TriMesh& target, const RegistrationParams& params = {});

/// Rigid bidirectional ICP (point-to-point, then point-to-plane). Returns
/// (R, t) mapping source onto target.
std::pair<Mat3, Vec3> rigid_align(const TriMesh& source, const TriMesh& target, const SpatialIndex& source_index,
                                  const SpatialIndex& target_index);

/// sqrt(mean of squared a-vertex -> b-surface and b-vertex -> a-surface
/// distances). Symmetric by construction.
double registration_error(const TriMesh& a, const TriMesh& b);
double registration_error(const TriMesh& a, const SpatialIndex& a_index, const TriMesh& b, const SpatialIndex& b_index);

}  // namespace vva
