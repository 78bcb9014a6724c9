#include "vva/registration.hpp"

#include "vva/kernels.hpp"
#include "vva/rotation.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>

namespace vva {

void RegistrationParams::validate() const {
    if (levels < 1) throw InvalidArgument("registration: levels must be >= 1");
    if (iters_per_level < 1) throw InvalidArgument("registration: iters_per_level must be >= 1");
    if (max_corr_dist < 0.0 || node_spacing < 0.0) throw InvalidArgument("registration: distances must be non-negative");
    if (!(max_normal_angle > 0.0 && max_normal_angle <= 180.0))
        throw InvalidArgument("registration: max_normal_angle must be in (0, 180]");
    if (!(arap_weight > 0.0) || !(point_to_plane_weight > 0.0))
        throw InvalidArgument("registration: weights must be positive");
    if (nodes_per_vertex < 1) throw InvalidArgument("registration: nodes_per_vertex must be >= 1");
    if (!(level_spacing_ratio > 1.0)) throw InvalidArgument("registration: level_spacing_ratio must exceed 1");
    if (!(coarse_gate_scale >= 1.0)) throw InvalidArgument("registration: coarse_gate_scale must be >= 1");
}

namespace {

Vec3 interpolated_normal(const std::vector<Vec3>& normals, const Face& f, const Vec3& bary) {
    const Vec3 n = bary[0] * normals[f[0]] + bary[1] * normals[f[1]] + bary[2] * normals[f[2]];
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : n;
}

std::vector<Vec3> strided(const std::vector<Vec3>& pts, int stride, std::vector<int>* ids = nullptr) {
    std::vector<Vec3> out;
    for (std::size_t i = 0; i < pts.size(); i += stride) {
        out.push_back(pts[i]);
        if (ids) ids->push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<Correspondence> correspondences_impl(const TriMesh& deformed, const std::vector<Vec3>& deformed_normals,
                                                 const SpatialIndex& source_index, const TriMesh& target,
                                                 const std::vector<Vec3>& target_normals,
                                                 const SpatialIndex& target_index, const CorrespondenceGates& gates,
                                                 int stride) {
    const double cos_gate = std::cos(gates.max_normal_angle * M_PI / 180.0);
    std::vector<Correspondence> out;

    std::vector<int> src_ids;
    const auto fwd = closest_points_within(target_index, strided(deformed.vertices, stride, &src_ids), gates.max_distance);
    for (std::size_t i = 0; i < fwd.size(); ++i) {
        if (!fwd[i]) continue;
        const int v = src_ids[i];
        const Vec3 n = interpolated_normal(target_normals, target.faces[fwd[i]->face], fwd[i]->bary);
        if (n.dot(deformed_normals[v]) < cos_gate) continue;
        Correspondence c;
        c.direction = Correspondence::Direction::Forward;
        c.source_vertex = v;
        c.target_face = fwd[i]->face;
        c.target_point = fwd[i]->point;
        c.target_normal = n;
        c.distance = fwd[i]->distance;
        out.push_back(c);
    }

    std::vector<int> tgt_ids;
    const auto rev = closest_points_within(source_index, strided(target.vertices, stride, &tgt_ids), gates.max_distance);
    for (std::size_t i = 0; i < rev.size(); ++i) {
        if (!rev[i]) continue;
        const int q = tgt_ids[i];
        const Vec3& n = target_normals[q];
        if (face_normal(deformed, rev[i]->face).dot(n) < cos_gate) continue;
        Correspondence c;
        c.direction = Correspondence::Direction::Reverse;
        c.source_face = rev[i]->face;
        c.source_bary = rev[i]->bary;
        c.target_vertex = q;
        c.target_point = target.vertices[q];
        c.target_normal = n;
        c.distance = rev[i]->distance;
        out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------- local Jacobians

constexpr int kMaxLocal = 24;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

struct Local {
    int count = 0;
    int node[kMaxLocal];
    Vec6 row[kMaxLocal];
    double residual = 0.0;

    void add(int j, double coeff, const Vec3& a, const Vec3& n) {
        int slot = 0;
        while (slot < count && node[slot] != j) ++slot;
        if (slot == count) {
            node[count] = j;
            row[count].setZero();
            ++count;
        }
        row[slot].head<3>() += coeff * a.cross(n);
        row[slot].tail<3>() += coeff * n;
    }
};

struct GraphState {
    const DeformationGraph& graph;
    std::vector<Mat3> rotation;
    explicit GraphState(const DeformationGraph& g) : graph(g), rotation(g.nodes.size()) {
        for (std::size_t j = 0; j < g.nodes.size(); ++j) rotation[j] = g.nodes[j].rotation.toRotationMatrix();
    }
};

Vec3 surface_point(const TriMesh& rest, const std::vector<Vec3>& warped, const Correspondence& c) {
    if (c.direction == Correspondence::Direction::Forward) return warped[c.source_vertex];
    const Face& f = rest.faces[c.source_face];
    return c.source_bary[0] * warped[f[0]] + c.source_bary[1] * warped[f[1]] + c.source_bary[2] * warped[f[2]];
}

void local_jacobian(const GraphState& s, const TriMesh& rest, const std::vector<Vec3>& warped, const Correspondence& c,
                    Local& out) {
    const DeformationGraph& g = s.graph;
    const int k = g.k;
    out.count = 0;
    const Vec3& n = c.target_normal;
    out.residual = n.dot(surface_point(rest, warped, c) - c.target_point);
    auto add_vertex = [&](int v, double scale) {
        const Vec3& p = rest.vertices[v];
        for (int i = 0; i < k; ++i) {
            const int j = g.binding_nodes[v * k + i];
            const double w = scale * g.binding_weights[v * k + i];
            if (w == 0.0) continue;
            out.add(j, w, s.rotation[j] * (p - g.nodes[j].position), n);
        }
    };
    if (c.direction == Correspondence::Direction::Forward) {
        add_vertex(c.source_vertex, 1.0);
    } else {
        const Face& f = rest.faces[c.source_face];
        for (int corner = 0; corner < 3; ++corner)
            if (c.source_bary[corner] != 0.0) add_vertex(f[corner], c.source_bary[corner]);
    }
}

double data_energy(const TriMesh& rest, const std::vector<Vec3>& warped, const std::vector<Correspondence>& corrs) {
    double e = 0.0;
    for (const Correspondence& c : corrs) {
        const double r = c.target_normal.dot(surface_point(rest, warped, c) - c.target_point);
        e += c.weight * r * r;
    }
    return e;
}

// ---------------------------------------------------------------- sparse normal equations

class BlockSystem {
public:
    BlockSystem(const DeformationGraph& g, const TriMesh& rest) : n_(static_cast<int>(g.nodes.size())) {
        std::vector<std::vector<int>> nbr(n_);
        auto link = [&](int a, int b) {
            if (a > b) std::swap(a, b);
            nbr[a].push_back(b);
        };
        for (int a = 0; a < n_; ++a) link(a, a);
        for (const auto& [a, b] : g.edges) link(a, b);
        const int k = g.k;
        std::vector<int> local;
        for (const Face& f : rest.faces) {
            local.clear();
            for (int v : f)
                for (int i = 0; i < k; ++i) local.push_back(g.binding_nodes[v * k + i]);
            std::sort(local.begin(), local.end());
            local.erase(std::unique(local.begin(), local.end()), local.end());
            for (std::size_t i = 0; i < local.size(); ++i)
                for (std::size_t j = i + 1; j < local.size(); ++j) link(local[i], local[j]);
        }
        upper_.resize(n_);
        int blocks = 0;
        for (int a = 0; a < n_; ++a) {
            auto& l = nbr[a];
            std::sort(l.begin(), l.end());
            l.erase(std::unique(l.begin(), l.end()), l.end());
            for (int b : l) upper_[a].emplace_back(b, blocks++);
        }
        blocks_.resize(blocks);
        grad_.resize(6 * n_);

        std::vector<Eigen::Triplet<double>> trip;
        for (int a = 0; a < n_; ++a)
            for (const auto& [b, id] : upper_[a])
                for (int r = 0; r < 6; ++r)
                    for (int c = 0; c < 6; ++c) {
                        if (a == b && c < r) continue;
                        trip.emplace_back(6 * a + r, 6 * b + c, 1.0);
                    }
        matrix_.resize(6 * n_, 6 * n_);
        matrix_.setFromTriplets(trip.begin(), trip.end());
        solver_.analyzePattern(matrix_);
    }

    void clear() {
        for (Mat6& b : blocks_) b.setZero();
        grad_.setZero();
    }

    Mat6& block(int a, int b) {
        for (auto& [col, id] : upper_[a])
            if (col == b) return blocks_[id];
        throw NumericalError("registration: missing block in sparsity pattern");
    }

    void add_local(const Local& l, double weight) {
        for (int i = 0; i < l.count; ++i) {
            grad_.segment<6>(6 * l.node[i]) += weight * l.residual * l.row[i];
            for (int j = 0; j < l.count; ++j) {
                if (l.node[i] > l.node[j]) continue;
                block(l.node[i], l.node[j]).noalias() += weight * l.row[i] * l.row[j].transpose();
            }
        }
    }

    // ARAP term for the directed edge j -> k.
    void add_arap(const GraphState& s, int j, int k, double weight) {
        const GraphNode& nj = s.graph.nodes[j];
        const GraphNode& nk = s.graph.nodes[k];
        const Vec3 a = s.rotation[j] * (nk.position - nj.position);
        const Vec3 r = a - (nk.position - nj.position) + nj.translation - nk.translation;
        Eigen::Matrix<double, 3, 6> Jj, Jk;
        Jj << -skew(a), Mat3::Identity();
        Jk << Mat3::Zero(), -Mat3::Identity();
        grad_.segment<6>(6 * j) += weight * Jj.transpose() * r;
        grad_.segment<6>(6 * k) += weight * Jk.transpose() * r;
        block(j, j).noalias() += weight * Jj.transpose() * Jj;
        block(k, k).noalias() += weight * Jk.transpose() * Jk;
        if (j < k)
            block(j, k).noalias() += weight * Jj.transpose() * Jk;
        else
            block(k, j).noalias() += weight * Jk.transpose() * Jj;
    }

    const Eigen::VectorXd& gradient() const { return grad_; }

    /// Solves (H + mu (diag(H) + eps)) delta = -g. Returns false if the
    /// factorization fails.
    bool solve(double mu, Eigen::VectorXd& delta) {
        double diag_mean = 0.0;
        for (int a = 0; a < n_; ++a) diag_mean += blocks_[upper_[a].front().second].trace();
        diag_mean /= 6.0 * std::max(1, n_);
        const double eps = 1e-9 * diag_mean + 1e-15;
        // Refill values in column-major order of the fixed pattern.
        for (int col = 0; col < matrix_.outerSize(); ++col) {
            const int b = col / 6, c = col % 6;
            for (Eigen::SparseMatrix<double>::InnerIterator it(matrix_, col); it; ++it) {
                const int row = static_cast<int>(it.row());
                const int a = row / 6, r = row % 6;
                double v = block(a, b)(r, c);
                if (row == col) v += mu * (v + eps);
                it.valueRef() = v;
            }
        }
        solver_.factorize(matrix_);
        if (solver_.info() != Eigen::Success) return false;
        delta = solver_.solve(-grad_);
        return solver_.info() == Eigen::Success && delta.allFinite();
    }

private:
    int n_;
    std::vector<std::vector<std::pair<int, int>>> upper_;
    std::vector<Mat6> blocks_;
    Eigen::VectorXd grad_;
    Eigen::SparseMatrix<double> matrix_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Upper> solver_;
};

double arap_weighted(const DeformationGraph& g, double weight) { return weight * arap_energy(g); }

int level_stride(int level, int levels) {
    int s = 1;
    for (int l = level; l < levels - 1; ++l) s *= 4;
    return s;
}

}  // namespace

std::vector<Correspondence> find_correspondences(const TriMesh& deformed_source, const TriMesh& target,
                                                 const SpatialIndex& target_index, const CorrespondenceGates& gates,
                                                 int stride) {
    if (stride < 1) throw InvalidArgument("find_correspondences: stride must be >= 1");
    const SpatialIndex source_index(deformed_source);
    return correspondences_impl(deformed_source, vertex_normals(deformed_source), source_index, target,
                                vertex_normals(target), target_index, gates, stride);
}

Eigen::VectorXd data_residuals(const DeformationGraph& graph, const TriMesh& rest_source,
                               const std::vector<Correspondence>& corrs) {
    const std::vector<Vec3> warped = warp_points_serial(graph, rest_source.vertices);
    Eigen::VectorXd r(corrs.size());
    for (std::size_t i = 0; i < corrs.size(); ++i)
        r[i] = corrs[i].target_normal.dot(surface_point(rest_source, warped, corrs[i]) - corrs[i].target_point);
    return r;
}

Eigen::MatrixXd data_jacobian(const DeformationGraph& graph, const TriMesh& rest_source,
                              const std::vector<Correspondence>& corrs) {
    const std::vector<Vec3> warped = warp_points_serial(graph, rest_source.vertices);
    const GraphState s(graph);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(corrs.size(), 6 * graph.nodes.size());
    Local l;
    for (std::size_t i = 0; i < corrs.size(); ++i) {
        local_jacobian(s, rest_source, warped, corrs[i], l);
        for (int a = 0; a < l.count; ++a) J.block<1, 6>(i, 6 * l.node[a]) = l.row[a].transpose();
    }
    return J;
}

void apply_increment(DeformationGraph& graph, const Eigen::VectorXd& delta) {
    if (delta.size() != static_cast<Eigen::Index>(6 * graph.nodes.size()))
        throw InvalidArgument("apply_increment: size mismatch");
    for (std::size_t j = 0; j < graph.nodes.size(); ++j) {
        GraphNode& n = graph.nodes[j];
        n.rotation = (quat_exp(delta.segment<3>(6 * j)) * n.rotation).normalized();
        n.translation += delta.segment<3>(6 * j + 3);
    }
}

// ---------------------------------------------------------------- rigid alignment

std::pair<Mat3, Vec3> rigid_align(const TriMesh& source, const TriMesh& target, const SpatialIndex& source_index,
                                  const SpatialIndex& target_index) {
    const double diag = std::max(bounding_box(source).diagonal(), bounding_box(target).diagonal());
    const int s_stride = std::max<int>(1, static_cast<int>(source.vertices.size() / 1500));
    const int t_stride = std::max<int>(1, static_cast<int>(target.vertices.size() / 1500));
    const std::vector<Vec3> src_pts = strided(source.vertices, s_stride);
    std::vector<int> tgt_ids;
    const std::vector<Vec3> tgt_pts = strided(target.vertices, t_stride, &tgt_ids);
    const std::vector<Vec3> tnormals = vertex_normals(target);

    Vec3 cs = Vec3::Zero(), ct = Vec3::Zero();
    for (const Vec3& p : source.vertices) cs += p;
    for (const Vec3& p : target.vertices) ct += p;
    cs /= static_cast<double>(source.vertices.size());
    ct /= static_cast<double>(target.vertices.size());
    Mat3 R = Mat3::Identity();
    Vec3 t = ct - cs;

    constexpr int kPointIters = 15, kMaxIters = 60;
    std::vector<Vec3> moved(src_pts.size()), back(tgt_pts.size());
    for (int it = 0; it < kMaxIters; ++it) {
        for (std::size_t i = 0; i < src_pts.size(); ++i) moved[i] = R * src_pts[i] + t;
        for (std::size_t i = 0; i < tgt_pts.size(); ++i) back[i] = R.transpose() * (tgt_pts[i] - t);
        const auto fwd = closest_points(target_index, moved);
        const auto rev = closest_points(source_index, back);

        // (current point p, matched point q, plane normal n)
        struct Pair {
            Vec3 p, q, n;
            double d;
        };
        std::vector<Pair> pairs;
        pairs.reserve(fwd.size() + rev.size());
        for (std::size_t i = 0; i < fwd.size(); ++i)
            pairs.push_back({moved[i], fwd[i].point,
                             interpolated_normal(tnormals, target.faces[fwd[i].face], fwd[i].bary), fwd[i].distance});
        for (std::size_t i = 0; i < rev.size(); ++i)
            pairs.push_back({R * rev[i].point + t, tgt_pts[i], tnormals[tgt_ids[i]], rev[i].distance});
        std::vector<double> ds;
        for (const Pair& p : pairs) ds.push_back(p.d);
        std::nth_element(ds.begin(), ds.begin() + ds.size() / 2, ds.end());
        const double keep = std::max(3.0 * ds[ds.size() / 2], 1e-3 * diag);

        Mat3 dR = Mat3::Identity();
        Vec3 dt = Vec3::Zero();
        if (it < kPointIters) {
            Vec3 mp = Vec3::Zero(), mq = Vec3::Zero();
            int count = 0;
            for (const Pair& p : pairs)
                if (p.d <= keep) {
                    mp += p.p;
                    mq += p.q;
                    ++count;
                }
            if (count < 3) break;
            mp /= count;
            mq /= count;
            Mat3 H = Mat3::Zero();
            for (const Pair& p : pairs)
                if (p.d <= keep) H += (p.p - mp) * (p.q - mq).transpose();
            Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
            Mat3 D = Mat3::Identity();
            if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) D(2, 2) = -1.0;
            dR = svd.matrixV() * D * svd.matrixU().transpose();
            dt = mq - dR * mp;
        } else {
            Mat6 A = Mat6::Zero();
            Vec6 b = Vec6::Zero();
            for (const Pair& p : pairs) {
                if (p.d > keep) continue;
                Vec6 row;
                row << p.p.cross(p.n), p.n;
                A.noalias() += row * row.transpose();
                b += row * p.n.dot(p.p - p.q);
            }
            const Vec6 x = A.ldlt().solve(-b);
            if (!x.allFinite()) break;
            dR = quat_exp(x.head<3>()).toRotationMatrix();
            dt = x.tail<3>();
        }
        R = dR * R;
        t = dR * t + dt;
        // Keep R orthonormal.
        R = Quat(R).normalized().toRotationMatrix();
        const double angle = Eigen::AngleAxisd(dR).angle();
        if (it >= kPointIters && angle < 1e-12 && dt.norm() < 1e-12 * diag) break;
    }
    return {R, t};
}

// ---------------------------------------------------------------- registration

double registration_error(const TriMesh& a, const SpatialIndex& a_index, const TriMesh& b, const SpatialIndex& b_index) {
    const double sab = sum_squared_distances(b_index, a.vertices);
    const double sba = sum_squared_distances(a_index, b.vertices);
    const double n = static_cast<double>(a.vertices.size() + b.vertices.size());
    if (n == 0) return 0.0;
    return std::sqrt((sab + sba) / n);
}

double registration_error(const TriMesh& a, const TriMesh& b) {
    if (a.empty() || b.empty()) throw InvalidArgument("registration_error: empty mesh");
    const SpatialIndex ia(a), ib(b);
    return registration_error(a, ia, b, ib);
}

RegistrationResult register_meshes(const TriMesh& source, const TriMesh& target, const RegistrationParams& params) {
    params.validate();
    if (source.empty() || target.empty()) throw InvalidArgument("register: source and target must be non-empty");
    validate_mesh(source);
    validate_mesh(target);

    RegistrationResult result;
    const double tdiag = bounding_box(target).diagonal();
    const double sdiag = bounding_box(source).diagonal();
    const double max_dist = params.max_corr_dist > 0.0 ? params.max_corr_dist : 0.05 * tdiag;
    const double spacing = params.node_spacing > 0.0 ? params.node_spacing : 0.025 * sdiag;

    const SpatialIndex target_index(target);
    const SpatialIndex source_rest_index(source);
    const std::vector<Vec3> tnormals = vertex_normals(target);

    // Rigid stage; kept only if it brings the meshes closer.
    Mat3 R0 = Mat3::Identity();
    Vec3 t0 = Vec3::Zero();
    double start_error = registration_error(source, source_rest_index, target, target_index);
    if (params.rigid_prealign) {
        const auto [R, t] = rigid_align(source, target, source_rest_index, target_index);
        const TriMesh moved = transformed(source, R, t);
        const SpatialIndex moved_index(moved);
        const double e = registration_error(moved, moved_index, target, target_index);
        if (e < start_error) {
            R0 = R;
            t0 = t;
            start_error = e;
        }
    }
    result.rigid_rotation = R0;
    result.rigid_translation = t0;

    const GraphHierarchy hierarchy =
        build_hierarchy(source, spacing, params.levels, params.level_spacing_ratio, params.nodes_per_vertex, &result.warnings);

    DeformationGraph graph = hierarchy.levels[0];
    const Quat q0(R0);
    for (GraphNode& n : graph.nodes) {
        n.rotation = q0;
        n.translation = R0 * n.position + t0 - n.position;
    }

    bool healthy = true;
    for (int level = 0; level < params.levels; ++level) {
        if (level > 0) graph = refine_to_level(hierarchy, graph, level);
        LevelTrace trace;
        trace.level = level;
        trace.nodes = static_cast<int>(graph.nodes.size());
        trace.node_spacing = graph.node_spacing;
        trace.gate = max_dist * std::pow(params.coarse_gate_scale, params.levels - 1 - level);
        trace.arap_weight = params.arap_weight / std::pow(2.0, level);
        const int stride = level_stride(level, params.levels);
        const double data_weight = params.point_to_plane_weight * stride;
        const CorrespondenceGates gates{trace.gate, params.max_normal_angle};

        BlockSystem system(graph, source);
        double mu = 1e-4;
        for (int iter = 0; iter < params.iters_per_level; ++iter) {
            TriMesh deformed = source;
            deformed.vertices = warp_points(graph, source.vertices);
            const SpatialIndex deformed_index(deformed);
            std::vector<Correspondence> corrs = correspondences_impl(deformed, vertex_normals(deformed), deformed_index,
                                                                     target, tnormals, target_index, gates, stride);
            for (Correspondence& c : corrs) c.weight = data_weight;
            trace.correspondences = corrs.size();
            ++trace.iterations;
            ++result.iterations_used;

            const GraphState state(graph);
            const double e0 = data_energy(source, deformed.vertices, corrs) + arap_weighted(graph, trace.arap_weight);
            trace.energies.push_back(e0);
            if (!std::isfinite(e0)) {
                healthy = false;
                break;
            }
            system.clear();
            Local local;
            for (const Correspondence& c : corrs) {
                local_jacobian(state, source, deformed.vertices, c, local);
                system.add_local(local, c.weight);
            }
            for (const auto& [a, b] : graph.edges) {
                system.add_arap(state, a, b, trace.arap_weight);
                system.add_arap(state, b, a, trace.arap_weight);
            }
            if (system.gradient().norm() == 0.0) break;

            bool accepted = false;
            Eigen::VectorXd delta;
            double e1 = e0;
            for (int attempt = 0; attempt < 12; ++attempt) {
                if (!system.solve(mu, delta)) {
                    mu *= 10.0;
                    continue;
                }
                DeformationGraph trial = graph;
                apply_increment(trial, delta);
                const std::vector<Vec3> warped = warp_points(trial, source.vertices);
                e1 = data_energy(source, warped, corrs) + arap_weighted(trial, trace.arap_weight);
                if (std::isfinite(e1) && e1 < e0) {
                    graph = std::move(trial);
                    mu = std::max(mu * 0.5, 1e-12);
                    accepted = true;
                    break;
                }
                mu *= 10.0;
            }
            if (!accepted) break;
            trace.steps.push_back({e0, e1});
            double max_t = 0.0;
            for (std::size_t j = 0; j < graph.nodes.size(); ++j) max_t = std::max(max_t, delta.segment<3>(6 * j + 3).norm());
            if (e0 - e1 <= 1e-9 * e0 && max_t < 1e-7 * sdiag) break;
        }
        result.levels.push_back(trace);
        if (!healthy) break;
    }

    result.graph = graph;
    result.deformed_source = apply_deformation(graph, source);
    const SpatialIndex deformed_index(result.deformed_source);
    result.error = registration_error(result.deformed_source, deformed_index, target, target_index);
    if (!healthy || !std::isfinite(result.error) || result.error > start_error * (1.0 + 1e-6) + 1e-12 * tdiag) {
        // Fall back to the rigid iterate, which is the best state known.
        result.converged = false;
        result.warnings.push_back("register: non-rigid stage did not improve on the rigid alignment");
        DeformationGraph rigid = hierarchy.levels.back();
        for (GraphNode& n : rigid.nodes) {
            n.rotation = q0;
            n.translation = R0 * n.position + t0 - n.position;
        }
        result.graph = rigid;
        result.deformed_source = apply_deformation(rigid, source);
        const SpatialIndex idx(result.deformed_source);
        result.error = registration_error(result.deformed_source, idx, target, target_index);
    }
    return result;
}

}  // namespace vva
