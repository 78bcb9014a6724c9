#pragma once

#include "vva/spatial_index.hpp"

#include <optional>

namespace vva {

/// Batched closest-point queries. Every parallel kernel has a serial twin
/// producing bit-identical results; the serial versions are the test
/// reference and the benchmark baseline.
///
/// `hints` (optional, one face id per query, -1 for none) only seed the
/// search bound.
std::vector<SurfacePoint> closest_points(const SpatialIndex& index, const std::vector<Vec3>& queries,
                                         const std::vector<int>& hints = {});
std::vector<SurfacePoint> closest_points_serial(const SpatialIndex& index, const std::vector<Vec3>& queries,
                                                const std::vector<int>& hints = {});

/// Gated variant: entries beyond `max_distance` are empty.
std::vector<std::optional<SurfacePoint>> closest_points_within(const SpatialIndex& index,
                                                               const std::vector<Vec3>& queries, double max_distance);
std::vector<std::optional<SurfacePoint>> closest_points_within_serial(const SpatialIndex& index,
                                                                      const std::vector<Vec3>& queries,
                                                                      double max_distance);

/// Sum of squared distances from `points` to the indexed surface, accumulated
/// in index order (thread-count independent).
double sum_squared_distances(const SpatialIndex& index, const std::vector<Vec3>& points);

}  // namespace vva
