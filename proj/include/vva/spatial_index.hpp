#pragma once

#include "vva/mesh.hpp"

#include <optional>

namespace vva {

struct SurfacePoint {
    int face = -1;
    Vec3 point = Vec3::Zero();
    Vec3 bary = Vec3::Zero();
    double distance = 0.0;
};

/// Static kd-tree over a point set with deterministic tie-breaking.
class PointIndex {
public:
    PointIndex() = default;
    explicit PointIndex(std::vector<Vec3> points);

    int nearest(const Vec3& p) const;
    /// The k nearest points ordered by (distance, id). Returns fewer when the
    /// set is smaller than k.
    std::vector<std::pair<int, double>> k_nearest(const Vec3& p, std::size_t k) const;

    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

private:
    struct Node {
        int point = -1;
        int axis = 0;
        int left = -1, right = -1;
    };
    int build(int begin, int end, int depth);

    std::vector<Vec3> points_;
    std::vector<int> ids_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

/// Bounding-volume hierarchy over the triangles of a mesh plus a kd-tree over
/// its vertices. Immutable after construction; queries are const and safe to
/// run concurrently. Results equal a brute-force scan, with exact ties going
/// to the lowest face / vertex id.
class SpatialIndex {
public:
    SpatialIndex() = default;
    explicit SpatialIndex(const TriMesh& mesh);

    /// Throws InvalidArgument if the mesh has no faces.
    SurfacePoint closest_point(const Vec3& p) const;
    /// Only faces within `max_distance` (inclusive) are considered.
    std::optional<SurfacePoint> closest_point_within(const Vec3& p, double max_distance) const;
    /// `hint_face` only seeds the search bound; the answer is unchanged.
    SurfacePoint closest_point_hinted(const Vec3& p, int hint_face) const;

    int nearest_vertex(const Vec3& p) const;

    std::size_t num_faces() const { return faces_.size(); }
    std::size_t num_vertices() const { return points_.size(); }
    const std::vector<Vec3>& vertices() const { return points_; }
    const std::vector<Face>& faces() const { return faces_; }

private:
    struct Node {
        Eigen::AlignedBox3d box;
        int left = -1, right = -1;  // children; -1 for leaves
        int begin = 0, end = 0;     // primitive range for leaves
    };

    int build(int begin, int end, const std::vector<Vec3>& centroids);
    SurfacePoint query(const Vec3& p, double bound_sq, int bound_face) const;

    std::vector<Vec3> points_;
    std::vector<Face> faces_;
    std::vector<Node> nodes_;
    std::vector<int> order_;             // BVH leaf order -> face id
    std::vector<std::array<Vec3, 3>> tri_;  // triangle corners in BVH order

    PointIndex vertex_tree_;
};

}  // namespace vva
