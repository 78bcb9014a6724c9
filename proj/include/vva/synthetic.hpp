#pragma once

#include "vva/body_model.hpp"
#include "vva/mesh.hpp"

namespace vva {

/// Planar grid in z = 0 spanning [0, size]^2 with nx x ny cells, each cell
/// split along the same diagonal (right triangles, hence Delaunay).
TriMesh make_grid(int nx, int ny, double size = 1.0);

/// Axis-aligned unit cube [0,1]^3, 8 vertices, 12 outward-facing triangles.
TriMesh make_cube();
/// Regular tetrahedron with unit edge length.
TriMesh make_tetrahedron();
/// Icosahedron subdivided `level` times, vertices projected to the sphere.
TriMesh make_icosphere(int level, double radius = 1.0);
TriMesh make_torus(double major, double minor, int nu, int nv);
/// Capped cylinder along +y from y = 0 to y = length. `rings` counts the
/// segments along the axis.
TriMesh make_cylinder(double radius, double length, int rings, int segments);

/// One step of Loop subdivision (boundary edges use the crease rules).
TriMesh loop_subdivide(const TriMesh& mesh);

/// Coarse quad-box cage of a standing figure (triangulated), before
/// subdivision. Units: meters, roughly 1.8 m tall.
TriMesh make_body_cage();

/// Smooth human-proportioned closed mesh: the cage after `subdivisions` Loop
/// steps, rescaled to 1.8 m height standing on y = 0. Four steps give 52224
/// faces.
TriMesh make_human_body(int subdivisions = 4);

/// 12-joint skinned human built on make_human_body: pelvis root, spine, neck,
/// head, shoulders, elbows, hips, knees.
SkinnedModel make_human_model(int subdivisions = 4);

/// Cylinder around a two-joint chain along +y: root at y = 0, child at
/// length/2. Weights ramp linearly from the root to the child over the middle
/// half, so the mid ring is weighted 0.5/0.5.
SkinnedModel make_twist_cylinder(double radius = 0.1, double length = 1.0, int rings = 40, int segments = 32);

/// Straight chain of `joints` joints along +x with a cylinder skin; used for
/// small-scale fitting tests.
SkinnedModel make_chain_model(int joints = 3, double bone_length = 0.3, double radius = 0.05);

/// Deterministic pose with `degrees` of swing at every non-root joint (and
/// half that in twist), alternating directions; used as the articulated
/// variant in registration tests.
SwingTwistPose articulated_pose(const Skeleton& skeleton, double degrees);

/// Smooth motion of the human model rising and falling as sin(pi t / (frames-1)):
/// legs swing front/back, arms rise sideways, elbows bend, spine and head
/// turn, root drifts forward 4 mm per frame. Peak swing is max_degrees;
/// 0 gives a static sequence.
std::vector<SwingTwistPose> demo_trajectory(const Skeleton& skeleton, int frames, double max_degrees);

}  // namespace vva
