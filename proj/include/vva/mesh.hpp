#pragma once

#include "vva/common.hpp"

#include <optional>
#include <utility>

namespace vva {

/// Indexed triangle mesh. Positions are in meters. `importance` is either
/// empty (meaning 1 everywhere) or holds one value in [0,1] per vertex; `uv`
/// is either empty or one coordinate per vertex and is never interpreted.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<double> importance;
    std::vector<Vec2> uv;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_faces() const { return faces.size(); }
    bool empty() const { return vertices.empty() || faces.empty(); }

    double importance_at(std::size_t v) const { return importance.empty() ? 1.0 : importance[v]; }
};

inline constexpr double kMinFaceArea = 1e-12;

/// Result of structural validation. An empty report means the mesh satisfies
/// the TriMesh invariants.
struct MeshValidation {
    std::vector<std::size_t> out_of_range_faces;
    std::vector<std::size_t> repeated_vertex_faces;
    std::vector<std::size_t> degenerate_faces;
    bool bad_attribute_sizes = false;

    bool ok() const {
        return out_of_range_faces.empty() && repeated_vertex_faces.empty() &&
               degenerate_faces.empty() && !bad_attribute_sizes;
    }
    std::string describe() const;
};

MeshValidation check_mesh(const TriMesh& mesh);
/// Throws ValidationError naming the offending faces.
void validate_mesh(const TriMesh& mesh);

struct BBox {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void extend(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    bool valid() const { return (min.array() <= max.array()).all(); }
    double diagonal() const { return valid() ? (max - min).norm() : 0.0; }
    Vec3 center() const { return 0.5 * (min + max); }
};

BBox bounding_box(const std::vector<Vec3>& points);
inline BBox bounding_box(const TriMesh& mesh) { return bounding_box(mesh.vertices); }

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
Vec3 face_normal(const TriMesh& mesh, std::size_t f);  // unit, right-hand winding
std::vector<Vec3> face_normals(const TriMesh& mesh);
/// Area-weighted average of incident face normals, normalized.
std::vector<Vec3> vertex_normals(const TriMesh& mesh);

/// Undirected edge table. `edges` are sorted (lo, hi) pairs; `face_edges`
/// maps each face's edge k (opposite corner k) to an edge id;
/// `edge_faces[e]` lists incident faces in ascending order.
struct EdgeTopology {
    std::vector<std::pair<int, int>> edges;
    std::vector<std::array<int, 3>> face_edges;
    std::vector<std::vector<int>> edge_faces;

    std::size_t max_edge_valence() const;
};

EdgeTopology build_edge_topology(const TriMesh& mesh);

/// Per-vertex incident face lists (ascending face ids).
std::vector<std::vector<int>> vertex_faces(const TriMesh& mesh);

/// Per-vertex sorted neighbor lists.
std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh);

/// Connected components over shared vertices; returns per-vertex component
/// ids (isolated vertices get their own ids) and the count.
std::pair<std::vector<int>, int> vertex_components(const TriMesh& mesh);

/// Ordered frames plus optional grouping. Frame i of `frames` is frame index i.
struct FrameGroup {
    std::size_t keyframe = 0;
    std::size_t first = 0;
    std::size_t last = 0;  // inclusive
};

struct MeshSequence {
    std::vector<TriMesh> frames;
    double frame_rate = 25.0;
    std::vector<FrameGroup> groups;

    std::size_t size() const { return frames.size(); }
};

/// Throws ValidationError when groups do not partition [0, size) or a
/// keyframe lies outside its group.
void validate_groups(const std::vector<FrameGroup>& groups, std::size_t frame_count);

TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& translation);

}  // namespace vva
