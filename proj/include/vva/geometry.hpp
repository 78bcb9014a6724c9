#pragma once

#include "vva/mesh.hpp"

#include <optional>

namespace vva {

double surface_area(const TriMesh& mesh);

enum class ComponentTopology { ClosedManifold, Open, NonManifold };

struct ComponentGenus {
    int component = 0;
    ComponentTopology topology = ComponentTopology::ClosedManifold;
    std::optional<int> genus;  // set only for closed 2-manifold components
    int vertices = 0, edges = 0, faces = 0;
};

/// Genus of every connected component from its Euler characteristic.
/// Components with boundary or with non-manifold edges/vertices are flagged
/// and carry no genus. Components are numbered by their lowest vertex id;
/// vertices referenced by no face are ignored.
std::vector<ComponentGenus> genus_per_component(const TriMesh& mesh);

struct TrianglePoint {
    Vec3 point;
    Vec3 bary;  // weights of (a, b, c)
    double signed_distance = 0.0;
};

/// Closest point of the closed triangle abc to p. `signed_distance` is the
/// component of (p - point) along the unit normal (b-a)x(c-a). Throws
/// InvalidArgument for degenerate triangles.
TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Squared distance only; no degeneracy check. Used in hot loops.
double closest_point_sq(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, Vec3& point, Vec3& bary);

}  // namespace vva
