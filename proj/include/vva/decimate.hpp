#pragma once

#include "vva/mesh.hpp"

#include <Eigen/Core>

namespace vva {

/// Symmetric 4x4 error quadric over homogeneous points.
struct Quadric {
    Eigen::Matrix4d m = Eigen::Matrix4d::Zero();

    /// Plane n.x + d = 0 (n unit) scaled by `weight`.
    static Quadric plane(const Vec3& n, double d, double weight);
    double evaluate(const Vec3& p) const;
    Quadric& operator+=(const Quadric& o) {
        m += o.m;
        return *this;
    }
    Quadric operator+(const Quadric& o) const {
        Quadric q = *this;
        q += o;
        return q;
    }
};

struct VertexQuadrics {
    std::vector<Quadric> quadrics;
    std::vector<int> skipped_faces;  // degenerate faces left out
};

/// Per-vertex sum of incident face plane quadrics weighted by face area.
VertexQuadrics compute_vertex_quadrics(const TriMesh& mesh);

struct DecimationParams {
    std::size_t target_faces = 0;
    double importance_exponent = 2.0;
    bool preserve_boundary = true;
    /// Stop after this many collapses (0 = unlimited). Used to inspect
    /// prefixes of the collapse sequence.
    std::size_t max_collapses = 0;
};

struct Collapse {
    int kept = 0;     // the lower vertex id, which survives
    int removed = 0;
    Vec3 position;
    double cost = 0.0;
};

struct DecimationResult {
    TriMesh mesh;
    std::vector<Collapse> collapses;
    Warnings warnings;
};

/// Greedy quadric edge collapse. Cost of edge (i,j) is the combined quadric
/// at the optimal contraction point times mean(importance)^exponent; ties
/// go to the lexicographically smallest (cost, min id, max id). Collapses
/// that flip a face, create a degenerate face, or break the link condition
/// are rejected. Throws InvalidArgument for target_faces < 4.
DecimationResult decimate(const TriMesh& mesh, const DecimationParams& params);

/// Helpers shared with tests: the optimal contraction point of `q` for an
/// edge between a and b, and the boundary constraint quadric weight.
Vec3 optimal_contraction_point(const Quadric& q, const Vec3& a, const Vec3& b);
inline constexpr double kBoundaryConstraintWeight = 1e3;

}  // namespace vva
