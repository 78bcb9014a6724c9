#pragma once

#include "vva/mesh.hpp"

#include <Eigen/SparseCore>

namespace vva {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct CotanLaplacian {
    /// L = D - W with W_ij = (cot a_ij + cot b_ij) / 2 (clamped at 0) and
    /// D_ii = sum_j W_ij, so L is positive semidefinite and L * 1 = 0.
    SparseMatrix matrix;
    std::size_t clamped_edges = 0;
};

/// Throws ValidationError if an edge has more than two incident faces.
CotanLaplacian cotangent_laplacian(const TriMesh& mesh);

}  // namespace vva
