#include "vva/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace vva {

namespace {

double signed_volume(const TriMesh& m) {
    double v = 0.0;
    for (const Face& f : m.faces) v += m.vertices[f[0]].dot(m.vertices[f[1]].cross(m.vertices[f[2]]));
    return v / 6.0;
}

void orient_outward(TriMesh& m) {
    if (signed_volume(m) < 0.0)
        for (Face& f : m.faces) std::swap(f[1], f[2]);
}

}  // namespace

TriMesh make_grid(int nx, int ny, double size) {
    if (nx < 1 || ny < 1) throw InvalidArgument("make_grid: need at least one cell per side");
    TriMesh m;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) m.vertices.emplace_back(size * i / nx, size * j / ny, 0.0);
    auto id = [&](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return m;
}

TriMesh make_cube() {
    TriMesh m;
    for (int k = 0; k < 8; ++k) m.vertices.emplace_back(k & 1, (k >> 1) & 1, (k >> 2) & 1);
    m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
               {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    orient_outward(m);
    return m;
}

TriMesh make_tetrahedron() {
    TriMesh m;
    const double s = 1.0 / std::sqrt(2.0);
    m.vertices = {Vec3(1, 0, -s) * 0.5, Vec3(-1, 0, -s) * 0.5, Vec3(0, 1, s) * 0.5, Vec3(0, -1, s) * 0.5};
    m.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    orient_outward(m);
    return m;
}

TriMesh make_icosphere(int level, double radius) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                  {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    m.faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
               {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            const int id = static_cast<int>(m.vertices.size());
            m.vertices.push_back(0.5 * (m.vertices[a] + m.vertices[b]));
            mid.emplace(key, id);
            return id;
        };
        std::vector<Face> faces;
        for (const Face& f : m.faces) {
            const int a = midpoint(f[0], f[1]), b = midpoint(f[1], f[2]), c = midpoint(f[2], f[0]);
            faces.push_back({f[0], a, c});
            faces.push_back({f[1], b, a});
            faces.push_back({f[2], c, b});
            faces.push_back({a, b, c});
        }
        m.faces = std::move(faces);
    }
    for (Vec3& v : m.vertices) v = radius * v.normalized();
    orient_outward(m);
    return m;
}

TriMesh make_torus(double major, double minor, int nu, int nv) {
    TriMesh m;
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
            const double u = 2.0 * M_PI * i / nu, v = 2.0 * M_PI * j / nv;
            m.vertices.emplace_back((major + minor * std::cos(v)) * std::cos(u), minor * std::sin(v),
                                    (major + minor * std::cos(v)) * std::sin(u));
        }
    auto id = [&](int i, int j) { return ((i + nu) % nu) * nv + (j + nv) % nv; };
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
            m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    orient_outward(m);
    return m;
}

TriMesh make_cylinder(double radius, double length, int rings, int segments) {
    TriMesh m;
    for (int i = 0; i <= rings; ++i)
        for (int j = 0; j < segments; ++j) {
            const double a = 2.0 * M_PI * j / segments;
            m.vertices.emplace_back(radius * std::cos(a), length * i / rings, radius * std::sin(a));
        }
    auto id = [&](int i, int j) { return i * segments + (j % segments); };
    for (int i = 0; i < rings; ++i)
        for (int j = 0; j < segments; ++j) {
            m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    const int bottom = static_cast<int>(m.vertices.size());
    m.vertices.emplace_back(0.0, 0.0, 0.0);
    const int top = bottom + 1;
    m.vertices.emplace_back(0.0, length, 0.0);
    for (int j = 0; j < segments; ++j) {
        m.faces.push_back({bottom, id(0, j + 1), id(0, j)});
        m.faces.push_back({top, id(rings, j), id(rings, j + 1)});
    }
    orient_outward(m);
    return m;
}

TriMesh loop_subdivide(const TriMesh& mesh) {
    const EdgeTopology topo = build_edge_topology(mesh);
    const std::size_t nv = mesh.vertices.size();
    const auto neighbors = vertex_neighbors(mesh);

    std::vector<char> on_boundary(nv, 0);
    std::vector<std::vector<int>> boundary_nbrs(nv);
    for (std::size_t e = 0; e < topo.edges.size(); ++e)
        if (topo.edge_faces[e].size() == 1) {
            const auto [a, b] = topo.edges[e];
            on_boundary[a] = on_boundary[b] = 1;
            boundary_nbrs[a].push_back(b);
            boundary_nbrs[b].push_back(a);
        }

    TriMesh out;
    out.vertices.resize(nv + topo.edges.size());
    for (std::size_t v = 0; v < nv; ++v) {
        const Vec3& p = mesh.vertices[v];
        if (on_boundary[v]) {
            if (boundary_nbrs[v].size() == 2)
                out.vertices[v] = 0.75 * p + 0.125 * (mesh.vertices[boundary_nbrs[v][0]] + mesh.vertices[boundary_nbrs[v][1]]);
            else
                out.vertices[v] = p;
            continue;
        }
        const std::size_t n = neighbors[v].size();
        if (n == 0) {
            out.vertices[v] = p;
            continue;
        }
        const double beta = n == 3 ? 3.0 / 16.0 : 3.0 / (8.0 * n);
        Vec3 sum = Vec3::Zero();
        for (int u : neighbors[v]) sum += mesh.vertices[u];
        out.vertices[v] = (1.0 - n * beta) * p + beta * sum;
    }
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
        const auto [a, b] = topo.edges[e];
        const Vec3 mid = mesh.vertices[a] + mesh.vertices[b];
        if (topo.edge_faces[e].size() != 2) {
            out.vertices[nv + e] = 0.5 * mid;
            continue;
        }
        Vec3 opp = Vec3::Zero();
        for (int f : topo.edge_faces[e])
            for (int k = 0; k < 3; ++k)
                if (topo.face_edges[f][k] == static_cast<int>(e)) opp += mesh.vertices[mesh.faces[f][k]];
        out.vertices[nv + e] = 0.375 * mid + 0.125 * opp;
    }
    out.faces.reserve(4 * mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        const int mab = static_cast<int>(nv) + topo.face_edges[f][2];
        const int mbc = static_cast<int>(nv) + topo.face_edges[f][0];
        const int mca = static_cast<int>(nv) + topo.face_edges[f][1];
        out.faces.push_back({t[0], mab, mca});
        out.faces.push_back({mab, t[1], mbc});
        out.faces.push_back({mca, mbc, t[2]});
        out.faces.push_back({mab, mbc, mca});
    }
    return out;
}

// ---------------------------------------------------------------- human

namespace {

// Cage lattice: column boundaries along x, row boundaries along y, one layer in z.
constexpr int kColMin = -4;
const double kXs[] = {-0.80, -0.65, -0.50, -0.35, -0.17, -0.06, 0.06, 0.17, 0.35, 0.50, 0.65, 0.80};
const double kYs[] = {0.0, 0.22, 0.45, 0.65, 0.85, 1.05, 1.25, 1.42, 1.52, 1.80};
const double kZs[] = {-0.10, 0.10};

std::vector<std::array<int, 2>> cage_cells() {
    std::vector<std::array<int, 2>> cells;
    for (int r = 4; r <= 6; ++r)
        for (int c = 0; c <= 2; ++c) cells.push_back({c, r});
    for (int r = 0; r <= 3; ++r) {
        cells.push_back({0, r});
        cells.push_back({2, r});
    }
    for (int c = -4; c <= -1; ++c) cells.push_back({c, 6});
    for (int c = 3; c <= 6; ++c) cells.push_back({c, 6});
    cells.push_back({1, 7});
    cells.push_back({1, 8});
    return cells;
}

struct BodyFrame {
    Vec3 offset;
    double scale;
    Vec3 map(const Vec3& cage) const { return (cage - offset) * scale; }
};

BodyFrame body_frame(int subdivisions, TriMesh* out) {
    TriMesh m = make_body_cage();
    for (int i = 0; i < subdivisions; ++i) m = loop_subdivide(m);
    const BBox box = bounding_box(m);
    BodyFrame frame;
    frame.offset = Vec3(0.0, box.min.y(), 0.0);
    frame.scale = 1.8 / (box.max.y() - box.min.y());
    if (out) {
        for (Vec3& v : m.vertices) v = frame.map(v);
        *out = std::move(m);
    }
    return frame;
}

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

// Distance-falloff weights to bone segments, truncated to `keep` influences.
std::vector<std::vector<SkinInfluence>> bone_weights(const TriMesh& mesh, const std::vector<std::pair<Vec3, Vec3>>& bones,
                                                     double power, std::size_t keep) {
    std::vector<std::vector<SkinInfluence>> weights(mesh.vertices.size());
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        std::vector<SkinInfluence> row;
        for (std::size_t j = 0; j < bones.size(); ++j) {
            const double d = segment_distance(mesh.vertices[v], bones[j].first, bones[j].second);
            row.push_back({static_cast<int>(j), 1.0 / std::pow(d + 0.01, power)});
        }
        std::stable_sort(row.begin(), row.end(), [](const SkinInfluence& a, const SkinInfluence& b) { return a.weight > b.weight; });
        row.resize(std::min(keep, row.size()));
        double sum = 0.0;
        for (const SkinInfluence& s : row) sum += s.weight;
        for (SkinInfluence& s : row) s.weight /= sum;
        std::sort(row.begin(), row.end(), [](const SkinInfluence& a, const SkinInfluence& b) { return a.joint < b.joint; });
        weights[v] = std::move(row);
    }
    return weights;
}

}  // namespace

TriMesh make_body_cage() {
    const auto cells = cage_cells();
    std::map<std::array<int, 2>, bool> occupied;
    for (const auto& c : cells) occupied[c] = true;
    auto filled = [&](int c, int r) { return occupied.count({c, r}) > 0; };

    TriMesh m;
    std::map<std::array<int, 3>, int> ids;
    auto vid = [&](int i, int j, int k) {
        const std::array<int, 3> key{i, j, k};
        auto it = ids.find(key);
        if (it != ids.end()) return it->second;
        const int id = static_cast<int>(m.vertices.size());
        m.vertices.emplace_back(kXs[i - kColMin], kYs[j], kZs[k]);
        ids.emplace(key, id);
        return id;
    };
    auto quad = [&](std::array<int, 3> base, std::array<int, 3> u, std::array<int, 3> v) {
        auto add = [](std::array<int, 3> a, std::array<int, 3> b) {
            return std::array<int, 3>{a[0] + b[0], a[1] + b[1], a[2] + b[2]};
        };
        const auto p1 = add(base, u), p3 = add(base, v), p2 = add(p1, v);
        const int a = vid(base[0], base[1], base[2]), b = vid(p1[0], p1[1], p1[2]);
        const int c = vid(p2[0], p2[1], p2[2]), d = vid(p3[0], p3[1], p3[2]);
        m.faces.push_back({a, b, c});
        m.faces.push_back({a, c, d});
    };
    const std::array<int, 3> X{1, 0, 0}, Y{0, 1, 0}, Z{0, 0, 1};
    for (const auto& [c, r] : cells) {
        if (!filled(c + 1, r)) quad({c + 1, r, 0}, Y, Z);
        if (!filled(c - 1, r)) quad({c, r, 0}, Z, Y);
        if (!filled(c, r + 1)) quad({c, r + 1, 0}, Z, X);
        if (!filled(c, r - 1)) quad({c, r, 0}, X, Z);
        quad({c, r, 1}, X, Y);
        quad({c, r, 0}, Y, X);
    }
    orient_outward(m);
    return m;
}

TriMesh make_human_body(int subdivisions) {
    TriMesh m;
    body_frame(subdivisions, &m);
    return m;
}

SkinnedModel make_human_model(int subdivisions) {
    SkinnedModel model;
    const BodyFrame frame = body_frame(subdivisions, &model.mesh);

    struct Spec {
        const char* name;
        int parent;
        Vec3 pos, end;
    };
    const Spec specs[] = {
        {"pelvis", -1, {0, 0.95, 0}, {0, 1.15, 0}},
        {"spine", 0, {0, 1.15, 0}, {0, 1.42, 0}},
        {"neck", 1, {0, 1.42, 0}, {0, 1.55, 0}},
        {"head", 2, {0, 1.55, 0}, {0, 1.80, 0}},
        {"l_shoulder", 1, {0.20, 1.335, 0}, {0.48, 1.335, 0}},
        {"l_elbow", 4, {0.48, 1.335, 0}, {0.80, 1.335, 0}},
        {"r_shoulder", 1, {-0.20, 1.335, 0}, {-0.48, 1.335, 0}},
        {"r_elbow", 6, {-0.48, 1.335, 0}, {-0.80, 1.335, 0}},
        {"l_hip", 0, {0.115, 0.85, 0}, {0.115, 0.45, 0}},
        {"l_knee", 8, {0.115, 0.45, 0}, {0.115, 0.0, 0}},
        {"r_hip", 0, {-0.115, 0.85, 0}, {-0.115, 0.45, 0}},
        {"r_knee", 10, {-0.115, 0.45, 0}, {-0.115, 0.0, 0}},
    };
    std::vector<std::pair<Vec3, Vec3>> bones;
    std::vector<Vec3> positions;
    for (const Spec& s : specs) {
        Joint j;
        j.name = s.name;
        j.parent = s.parent;
        const Vec3 p = frame.map(s.pos), e = frame.map(s.end);
        positions.push_back(p);
        j.offset = s.parent < 0 ? p : Vec3(p - positions[s.parent]);
        j.twist_axis = (e - p).normalized();
        if (s.parent >= 0) j.limits = JointLimits{Vec3(-2.5, -2.5, -1.5), Vec3(2.5, 2.5, 1.5)};
        model.skeleton.joints.push_back(j);
        bones.emplace_back(p, e);
    }
    model.weights = bone_weights(model.mesh, bones, 6.0, 4);
    return model;
}

SkinnedModel make_twist_cylinder(double radius, double length, int rings, int segments) {
    SkinnedModel model;
    model.mesh = make_cylinder(radius, length, rings, segments);
    Joint root;
    root.name = "root";
    root.twist_axis = Vec3::UnitY();
    Joint child;
    child.name = "child";
    child.parent = 0;
    child.offset = Vec3(0.0, 0.5 * length, 0.0);
    child.twist_axis = Vec3::UnitY();
    model.skeleton.joints = {root, child};
    for (const Vec3& v : model.mesh.vertices) {
        const double w = std::clamp((v.y() - 0.25 * length) / (0.5 * length), 0.0, 1.0);
        std::vector<SkinInfluence> row;
        if (w < 1.0) row.push_back({0, 1.0 - w});
        if (w > 0.0) row.push_back({1, w});
        model.weights.push_back(row);
    }
    return model;
}

SkinnedModel make_chain_model(int joints, double bone_length, double radius) {
    if (joints < 1) throw InvalidArgument("make_chain_model: need at least one joint");
    SkinnedModel model;
    const double length = joints * bone_length;
    TriMesh m = make_cylinder(radius, length, 8 * joints, 16);
    for (Vec3& v : m.vertices) v = Vec3(v.y(), -v.x(), v.z());
    model.mesh = m;
    std::vector<std::pair<Vec3, Vec3>> bones;
    for (int i = 0; i < joints; ++i) {
        Joint j;
        j.name = "joint" + std::to_string(i);
        j.parent = i - 1;
        j.offset = i == 0 ? Vec3::Zero() : Vec3(bone_length, 0.0, 0.0);
        j.twist_axis = Vec3::UnitX();
        model.skeleton.joints.push_back(j);
        bones.emplace_back(Vec3(i * bone_length, 0, 0), Vec3((i + 1) * bone_length, 0, 0));
    }
    model.weights = bone_weights(model.mesh, bones, 4.0, 4);
    return model;
}

SwingTwistPose articulated_pose(const Skeleton& skeleton, double degrees) {
    SwingTwistPose pose = SwingTwistPose::zero(skeleton.size());
    const double a = degrees * M_PI / 180.0;
    for (std::size_t j = 0; j < skeleton.size(); ++j) {
        if (skeleton.joints[j].parent < 0) continue;
        const double theta = 1.3 * static_cast<double>(j);
        pose.joints[j].swing = Vec2(a * std::cos(theta), a * std::sin(theta));
        pose.joints[j].twist = (j % 2 == 0 ? 0.5 : -0.5) * a;
    }
    return pose;
}

namespace {

// Swing coordinates of a rotation vector orthogonal to the joint's twist axis.
Vec2 swing_about(const Joint& joint, const Vec3& rotvec) {
    const auto [b1, b2] = orthonormal_basis(joint.twist_axis);
    return Vec2(rotvec.dot(b1), rotvec.dot(b2));
}

}  // namespace

std::vector<SwingTwistPose> demo_trajectory(const Skeleton& skeleton, int frames, double max_degrees) {
    if (frames < 1) throw InvalidArgument("demo_trajectory: frames must be positive");
    auto find = [&](const char* name) {
        for (std::size_t j = 0; j < skeleton.size(); ++j)
            if (skeleton.joints[j].name == name) return static_cast<int>(j);
        return -1;
    };
    std::vector<SwingTwistPose> out;
    for (int t = 0; t < frames; ++t) {
        const double phase = frames > 1 ? M_PI * t / (frames - 1) : 0.0;
        const double s = max_degrees * std::sin(phase) * M_PI / 180.0;
        SwingTwistPose p = SwingTwistPose::zero(skeleton.size());
        auto set = [&](const char* name, const Vec3& rotvec, double twist) {
            const int j = find(name);
            if (j <= 0) return;
            p.joints[j].swing = swing_about(skeleton.joints[j], rotvec);
            p.joints[j].twist = twist;
        };
        set("l_hip", Vec3(s, 0, 0), 0.0);
        set("r_hip", Vec3(-s, 0, 0), 0.0);
        set("l_knee", Vec3(-0.8 * s, 0, 0), 0.0);
        set("r_knee", Vec3(-0.4 * s, 0, 0), 0.0);
        set("l_shoulder", Vec3(0, 0, s), 0.3 * s);
        set("r_shoulder", Vec3(0, 0, -s), -0.3 * s);
        set("l_elbow", Vec3(0, 0.8 * s, 0), 0.0);
        set("r_elbow", Vec3(0, -0.8 * s, 0), 0.0);
        set("spine", Vec3(0.2 * s, 0, 0), 0.3 * s);
        set("neck", Vec3(0.2 * s, 0, 0), 0.0);
        set("head", Vec3(0, 0, 0.2 * s), 0.3 * s);
        if (max_degrees != 0.0) p.root_translation = Vec3(0.0, 0.0, 0.004 * t);
        out.push_back(p);
    }
    return out;
}

}  // namespace vva
