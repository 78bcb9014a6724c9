#include "vva/kernels.hpp"

namespace vva {

namespace {

SurfacePoint query_one(const SpatialIndex& index, const Vec3& p, const std::vector<int>& hints, std::size_t i) {
    if (!hints.empty() && hints[i] >= 0) return index.closest_point_hinted(p, hints[i]);
    return index.closest_point(p);
}

void check_hints(const std::vector<Vec3>& queries, const std::vector<int>& hints) {
    if (!hints.empty() && hints.size() != queries.size())
        throw InvalidArgument("closest_points: " + std::to_string(hints.size()) + " hints for " +
                              std::to_string(queries.size()) + " queries");
}

}  // namespace

std::vector<SurfacePoint> closest_points(const SpatialIndex& index, const std::vector<Vec3>& queries,
                                         const std::vector<int>& hints) {
    check_hints(queries, hints);
    if (index.num_faces() == 0) throw InvalidArgument("closest_point: index has no faces");
    std::vector<SurfacePoint> out(queries.size());
    const long long n = static_cast<long long>(queries.size());
#pragma omp parallel for schedule(dynamic, 256)
    for (long long i = 0; i < n; ++i) out[i] = query_one(index, queries[i], hints, i);
    return out;
}

std::vector<SurfacePoint> closest_points_serial(const SpatialIndex& index, const std::vector<Vec3>& queries,
                                                const std::vector<int>& hints) {
    check_hints(queries, hints);
    if (index.num_faces() == 0) throw InvalidArgument("closest_point: index has no faces");
    std::vector<SurfacePoint> out(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) out[i] = query_one(index, queries[i], hints, i);
    return out;
}

std::vector<std::optional<SurfacePoint>> closest_points_within(const SpatialIndex& index,
                                                               const std::vector<Vec3>& queries, double max_distance) {
    std::vector<std::optional<SurfacePoint>> out(queries.size());
    const long long n = static_cast<long long>(queries.size());
#pragma omp parallel for schedule(dynamic, 256)
    for (long long i = 0; i < n; ++i) out[i] = index.closest_point_within(queries[i], max_distance);
    return out;
}

std::vector<std::optional<SurfacePoint>> closest_points_within_serial(const SpatialIndex& index,
                                                                      const std::vector<Vec3>& queries,
                                                                      double max_distance) {
    std::vector<std::optional<SurfacePoint>> out(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) out[i] = index.closest_point_within(queries[i], max_distance);
    return out;
}

double sum_squared_distances(const SpatialIndex& index, const std::vector<Vec3>& points) {
    const std::vector<SurfacePoint> cp = closest_points(index, points);
    double sum = 0.0;
    for (const SurfacePoint& s : cp) sum += s.distance * s.distance;
    return sum;
}

}  // namespace vva
