#include "vva/fitting.hpp"

#include "vva/kernels.hpp"
#include "vva/laplacian.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <random>

namespace vva {

void PosePriorGMM::validate() const {
    if (weights.empty()) throw ValidationError("pose prior: no components");
    if (means.size() != weights.size() || variances.size() != weights.size())
        throw ValidationError("pose prior: weights, means and variances differ in count");
    double sum = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (!(weights[k] > 0.0) || !std::isfinite(weights[k]))
            throw ValidationError("pose prior: component " + std::to_string(k) + " has non-positive weight");
        sum += weights[k];
        if (means[k].size() != means[0].size() || variances[k].size() != means[0].size())
            throw ValidationError("pose prior: component " + std::to_string(k) + " has mismatched dimension");
        if (!(variances[k].array() > 0.0).all() || !variances[k].allFinite() || !means[k].allFinite())
            throw ValidationError("pose prior: component " + std::to_string(k) + " has invalid variance or mean");
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("pose prior: weights sum to " + std::to_string(sum));
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Per-component log(w_k N_k(x)).
std::vector<double> component_logs(const PosePriorGMM& prior, const Eigen::VectorXd& x) {
    if (static_cast<std::size_t>(x.size()) != prior.dimension())
        throw InvalidArgument("pose prior: expected dimension " + std::to_string(prior.dimension()) + ", got " +
                              std::to_string(x.size()));
    std::vector<double> out(prior.components());
    for (std::size_t k = 0; k < prior.components(); ++k) {
        const Eigen::ArrayXd var = prior.variances[k].array();
        const Eigen::ArrayXd d = x.array() - prior.means[k].array();
        out[k] = std::log(prior.weights[k]) - 0.5 * ((d * d / var).sum() + (var.log() + kLog2Pi).sum());
    }
    return out;
}

double log_sum_exp(const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double a : v) s += std::exp(a - m);
    return m + std::log(s);
}

std::vector<double> responsibilities(const PosePriorGMM& prior, const Eigen::VectorXd& x) {
    std::vector<double> l = component_logs(prior, x);
    const double lse = log_sum_exp(l);
    for (double& a : l) a = std::exp(a - lse);
    return l;
}

}  // namespace

double gmm_logprob(const PosePriorGMM& prior, const Eigen::VectorXd& x) { return log_sum_exp(component_logs(prior, x)); }

double gmm_logprob(const PosePriorGMM& prior, const SwingTwistPose& pose) { return gmm_logprob(prior, pose_scalars(pose)); }

Eigen::VectorXd gmm_neglog_gradient(const PosePriorGMM& prior, const Eigen::VectorXd& x) {
    const std::vector<double> g = responsibilities(prior, x);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        out.array() += g[k] * (x.array() - prior.means[k].array()) / prior.variances[k].array();
    return out;
}

PosePriorGMM fit_gmm(const std::vector<Eigen::VectorXd>& samples, int components, std::uint64_t seed, int iterations,
                     double min_variance) {
    if (samples.empty()) throw InvalidArgument("fit_gmm: no samples");
    if (components < 1 || static_cast<std::size_t>(components) > samples.size())
        throw InvalidArgument("fit_gmm: component count must be in [1, sample count]");
    const std::size_t n = samples.size();
    const Eigen::Index dim = samples[0].size();
    for (const auto& s : samples)
        if (s.size() != dim) throw InvalidArgument("fit_gmm: samples differ in dimension");

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& s : samples) mean += s;
    mean /= static_cast<double>(n);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
    for (const auto& s : samples) var.array() += (s - mean).array().square();
    var = (var / static_cast<double>(n)).cwiseMax(min_variance);

    // k-means++ seeding.
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> centers{std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)};
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (centers.size() < static_cast<std::size_t>(components)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (samples[i] - samples[centers.back()]).squaredNorm());
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (pick = 0; pick + 1 < n; ++pick) {
                r -= d2[pick];
                if (r <= 0.0 && d2[pick] > 0.0) break;
            }
        } else {
            pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        }
        centers.push_back(pick);
    }

    PosePriorGMM g;
    for (std::size_t c : centers) {
        g.weights.push_back(1.0 / components);
        g.means.push_back(samples[c]);
        g.variances.push_back(var);
    }

    double prev = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> resp(n);
    for (int it = 0; it < iterations; ++it) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> l = component_logs(g, samples[i]);
            const double lse = log_sum_exp(l);
            ll += lse;
            for (double& a : l) a = std::exp(a - lse);
            resp[i] = std::move(l);
        }
        for (int k = 0; k < components; ++k) {
            double nk = 0.0;
            Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim);
            for (std::size_t i = 0; i < n; ++i) {
                nk += resp[i][k];
                mu += resp[i][k] * samples[i];
            }
            if (nk <= 1e-12) continue;  // empty component keeps its parameters
            mu /= nk;
            Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
            for (std::size_t i = 0; i < n; ++i) v.array() += resp[i][k] * (samples[i] - mu).array().square();
            g.means[k] = mu;
            g.variances[k] = (v / nk).cwiseMax(min_variance);
            g.weights[k] = nk / static_cast<double>(n);
        }
        double wsum = 0.0;
        for (double w : g.weights) wsum += w;
        for (double& w : g.weights) w /= wsum;
        if (std::abs(ll - prev) <= 1e-10 * std::max(1.0, std::abs(ll))) break;
        prev = ll;
    }
    return g;
}

void FitParams::validate() const {
    if (!(max_distance > 0.0)) throw InvalidArgument("fit: max_distance must be positive");
    if (!(max_normal_angle > 0.0 && max_normal_angle <= 180.0))
        throw InvalidArgument("fit: max_normal_angle must be in (0, 180]");
    if (!(prior_weight >= 0.0)) throw InvalidArgument("fit: prior_weight must be non-negative");
    if (!(laplacian_weight >= 0.0)) throw InvalidArgument("fit: laplacian_weight must be non-negative");
    if (!(barrier_weight > 0.0)) throw InvalidArgument("fit: barrier_weight must be positive");
    if (max_iters < 1) throw InvalidArgument("fit: max_iters must be at least 1");
    if (!(convergence_tol >= 0.0)) throw InvalidArgument("fit: convergence_tol must be non-negative");
    if (alternation_rounds < 0) throw InvalidArgument("fit: alternation_rounds must be non-negative");
    if (shape_iters < 1) throw InvalidArgument("fit: shape_iters must be at least 1");
}

double model_residual(const SkinnedModel& model, const SwingTwistPose& pose, const TriMesh& frame,
                      const SpatialIndex& frame_index) {
    (void)frame;
    const TriMesh posed = skin(model, pose);
    if (posed.vertices.empty()) return 0.0;
    return std::sqrt(sum_squared_distances(frame_index, posed.vertices) / static_cast<double>(posed.vertices.size()));
}

namespace {

Vec3 interpolated_normal(const std::vector<Vec3>& normals, const Face& f, const Vec3& bary) {
    const Vec3 n = bary[0] * normals[f[0]] + bary[1] * normals[f[1]] + bary[2] * normals[f[2]];
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

struct BarrierTerm {
    double energy = 0.0;
    Eigen::VectorXd grad, hess;  // in parameter space (diagonal Hessian)
};

// -kappa * sum(log(x - lo) + log(hi - x)) over limited non-root joints;
// +inf outside the open box.
BarrierTerm barrier(const Skeleton& skel, const SwingTwistPose& pose, const PoseParameterization& par, double kappa) {
    BarrierTerm b;
    b.grad = Eigen::VectorXd::Zero(par.size());
    b.hess = Eigen::VectorXd::Zero(par.size());
    for (int j : par.joint_slots) {
        if (!skel.joints[j].limits) continue;
        const Vec3 x = pose.joints[j].as_vector();
        const JointLimits& lim = *skel.joints[j].limits;
        for (int a = 0; a < 3; ++a) {
            const double lo = x[a] - lim.lower[a], hi = lim.upper[a] - x[a];
            if (!(lo > 0.0 && hi > 0.0)) {
                b.energy = std::numeric_limits<double>::infinity();
                continue;
            }
            b.energy -= kappa * (std::log(lo) + std::log(hi));
            const int o = par.offset_of(j) + a;
            b.grad[o] += kappa * (-1.0 / lo + 1.0 / hi);
            b.hess[o] += kappa * (1.0 / (lo * lo) + 1.0 / (hi * hi));
        }
    }
    return b;
}

void push_inside(const Skeleton& skel, SwingTwistPose& pose) {
    for (std::size_t j = 0; j < skel.size(); ++j) {
        if (!skel.joints[j].limits) continue;
        const JointLimits& lim = *skel.joints[j].limits;
        Vec3 x = pose.joints[j].as_vector();
        const Vec3 margin = 1e-6 * (lim.upper - lim.lower);
        x = x.cwiseMax(lim.lower + margin).cwiseMin(lim.upper - margin);
        pose.joints[j] = JointAngles::from_vector(x);
    }
}

std::vector<Vec3> gather(const std::vector<Vec3>& all, const std::vector<int>& ids) {
    std::vector<Vec3> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) out[i] = all[ids[i]];
    return out;
}

}  // namespace

constexpr double kMaxAngleStep = 0.1;   // radians
constexpr double kMaxShiftStep = 0.05;  // meters

FitResult fit_pose(const SkinnedModel& model, const TriMesh& frame, const SwingTwistPose& init,
                   const PosePriorGMM* prior, const FitParams& params) {
    params.validate();
    const Skeleton& skel = model.skeleton;
    if (init.joints.size() != skel.size())
        throw InvalidArgument("fit: pose has " + std::to_string(init.joints.size()) + " joints, model has " +
                              std::to_string(skel.size()));
    if (frame.empty()) throw InvalidArgument("fit: frame mesh is empty");
    if (prior) {
        prior->validate();
        if (prior->dimension() != 3 * skel.size())
            throw InvalidArgument("fit: prior dimension " + std::to_string(prior->dimension()) + " does not match " +
                                  std::to_string(3 * skel.size()) + " pose scalars");
    }

    const SpatialIndex index(frame);
    const std::vector<Vec3> frame_normals = vertex_normals(frame);
    const PoseParameterization par(skel);
    const std::size_t np = par.size();
    const double cos_gate = std::cos(params.max_normal_angle * M_PI / 180.0);
    const bool use_prior = prior && params.prior_weight > 0.0;
    const bool use_barrier = params.bounds == BoundsMode::Barrier;

    std::vector<int> subset;
    const std::size_t nv = model.mesh.vertices.size();
    const std::size_t stride =
        params.max_vertices == 0 ? 1 : std::max<std::size_t>(1, (nv + params.max_vertices - 1) / params.max_vertices);
    for (std::size_t v = 0; v < nv; v += stride) subset.push_back(static_cast<int>(v));

    FitResult result;
    SwingTwistPose pose = init;
    clamp_to_limits(skel, pose);
    if (use_barrier) push_inside(skel, pose);

    // Prior and barrier energies with their (approximate) Hessians in
    // parameter space.
    auto regularizer = [&](const SwingTwistPose& p, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
        double e = 0.0;
        if (use_prior) {
            const Eigen::VectorXd x = pose_scalars(p);
            e += -params.prior_weight * gmm_logprob(*prior, x);
            if (grad) {
                const std::vector<double> g = responsibilities(*prior, x);
                Eigen::VectorXd gx = Eigen::VectorXd::Zero(x.size()), hx = Eigen::VectorXd::Zero(x.size());
                for (std::size_t k = 0; k < g.size(); ++k) {
                    gx.array() += g[k] * (x.array() - prior->means[k].array()) / prior->variances[k].array();
                    hx.array() += g[k] / prior->variances[k].array();
                }
                for (int j : par.joint_slots)
                    for (int a = 0; a < 3; ++a) {
                        (*grad)[par.offset_of(j) + a] += params.prior_weight * gx[3 * j + a];
                        (*hess)(par.offset_of(j) + a, par.offset_of(j) + a) += params.prior_weight * hx[3 * j + a];
                    }
            }
        }
        if (use_barrier) {
            const BarrierTerm b = barrier(skel, p, par, params.barrier_weight);
            e += b.energy;
            if (grad) {
                *grad += b.grad;
                hess->diagonal() += b.hess;
            }
        }
        return e;
    };

    double mu = 1e-4;
    for (int iter = 0; iter < params.max_iters; ++iter) {
        result.iterations = iter + 1;
        const TriMesh posed = skin(model, pose);
        const std::vector<Vec3> posed_normals = vertex_normals(posed);
        const std::vector<Vec3> queries = gather(posed.vertices, subset);
        const auto hits = closest_points_within(index, queries, params.max_distance);

        std::vector<int> active;  // model vertex ids passing the gates
        for (std::size_t i = 0; i < subset.size(); ++i) {
            if (!hits[i]) continue;
            const Vec3 fn = interpolated_normal(frame_normals, frame.faces[hits[i]->face], hits[i]->bary);
            if (fn.dot(posed_normals[subset[i]]) < cos_gate) continue;
            active.push_back(subset[i]);
        }
        if (active.empty()) {
            if (iter == 0) throw NumericalError("fit: initialization too far, no correspondences within the gates");
            break;
        }

        // Energy: squared distance of every active vertex to the frame
        // surface. Its Gauss-Newton model is point-to-plane at the closest
        // points, which does not stall on tangential sliding.
        const SkinJacobian sj = skin_with_jacobian(model, pose, par, active);
        const std::vector<SurfacePoint> closest = closest_points(index, sj.positions);
        Eigen::VectorXd r(active.size());
        Eigen::MatrixXd J(active.size(), np);
        double e_data = 0.0;
        for (std::size_t i = 0; i < active.size(); ++i) {
            const Vec3 n = face_normal(frame, closest[i].face);
            r[i] = n.dot(sj.positions[i] - closest[i].point);
            J.row(i) = n.transpose() * sj.jacobian.middleRows<3>(3 * i);
            e_data += closest[i].distance * closest[i].distance;
        }

        Eigen::VectorXd grad = J.transpose() * r;
        Eigen::MatrixXd H = J.transpose() * J;
        // The regularizer enters with weight 1/2 against the 1/2-scaled data
        // normal equations.
        Eigen::VectorXd rg = Eigen::VectorXd::Zero(np);
        Eigen::MatrixXd rh = Eigen::MatrixXd::Zero(np, np);
        const double e_reg = regularizer(pose, &rg, &rh);
        grad += 0.5 * rg;
        H += 0.5 * rh;
        const double e0 = e_data + e_reg;
        if (iter == 0) result.energy_trace.push_back(e0);

        auto energy_at = [&](const SwingTwistPose& p, std::vector<Vec3>* positions) {
            const TriMesh q = skin(model, p);
            const double e = sum_squared_distances(index, gather(q.vertices, active));
            if (positions) *positions = gather(q.vertices, subset);
            return e + regularizer(p, nullptr, nullptr);
        };

        bool accepted = false;
        double change = 0.0;
        for (int attempt = 0; attempt < 12; ++attempt) {
            Eigen::MatrixXd A = H;
            A.diagonal().array() += mu * H.diagonal().array() + 1e-12;
            Eigen::VectorXd delta = A.ldlt().solve(-grad);
            if (!delta.allFinite()) {
                mu *= 10.0;
                continue;
            }
            // Trust region: at most kMaxAngleStep per angle and kMaxShiftStep
            // of root translation.
            const double angle = delta.tail(np - 3).cwiseAbs().maxCoeff();
            const double shift = delta.head<3>().norm();
            const double scale = std::min({1.0, kMaxAngleStep / std::max(angle, 1e-300), kMaxShiftStep / std::max(shift, 1e-300)});
            if (scale < 1.0) delta *= scale;
            SwingTwistPose trial = par.apply(pose, delta);
            clamp_to_limits(skel, trial);
            std::vector<Vec3> moved;
            const double e1 = energy_at(trial, &moved);
            if (std::isfinite(e1) && e1 < e0) {
                double s = 0.0;
                for (std::size_t i = 0; i < subset.size(); ++i) s += (moved[i] - queries[i]).squaredNorm();
                change = std::sqrt(s / static_cast<double>(subset.size()));
                result.steps.push_back({e0, e1});
                result.energy_trace.push_back(e1);
                pose = trial;
                mu = std::max(mu * 0.3, 1e-12);
                accepted = true;
                break;
            }
            mu *= 10.0;
        }
        if (!accepted || change < params.convergence_tol) {
            result.converged = true;
            break;
        }
    }
    result.pose = pose;
    result.residual = model_residual(model, pose, frame, index);
    return result;
}

namespace {

using FrameList = std::vector<std::pair<const TriMesh*, SwingTwistPose>>;

double shape_residual_impl(const SkinnedModel& model, const FrameList& frames) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& [mesh, pose] : frames) {
        const TriMesh posed = skin(model, pose);
        const SpatialIndex pi(posed), fi(*mesh);
        s += sum_squared_distances(fi, posed.vertices) + sum_squared_distances(pi, mesh->vertices);
        n += posed.vertices.size() + mesh->vertices.size();
    }
    return n ? std::sqrt(s / static_cast<double>(n)) : 0.0;
}

}  // namespace

double shape_residual(const SkinnedModel& model, const FrameList& frames) { return shape_residual_impl(model, frames); }

ShapeResult adapt_shape(const SkinnedModel& model, const FrameList& frames, const FitParams& params) {
    params.validate();
    model.validate();
    if (frames.empty()) throw InvalidArgument("adapt_shape: no frames");
    for (const auto& [mesh, pose] : frames) {
        if (!mesh || mesh->empty()) throw InvalidArgument("adapt_shape: empty frame mesh");
        if (pose.joints.size() != model.skeleton.size()) throw InvalidArgument("adapt_shape: pose/model joint mismatch");
    }

    const std::size_t nv = model.mesh.vertices.size();
    const std::size_t nj = model.skeleton.size();
    const double cos_gate = std::cos(params.max_normal_angle * M_PI / 180.0);
    const EdgeTopology topo = build_edge_topology(model.mesh);
    const Eigen::SparseMatrix<double> L = cotangent_laplacian(model.mesh).matrix;
    const Eigen::SparseMatrix<double> LtL = Eigen::SparseMatrix<double>(L.transpose()) * L;
    const double lam = params.laplacian_weight;
    const double anchor = 1e-6 * lam;

    Eigen::MatrixXd V0(nv, 3);
    for (std::size_t v = 0; v < nv; ++v) V0.row(v) = model.mesh.vertices[v].transpose();

    ShapeResult out;
    out.model = model;
    out.residual_before = shape_residual_impl(model, frames);

    // Objective checked after every solve: ungated bidirectional squared
    // distances plus the regularizer. Steps that do not lower it end the loop.
    auto objective = [&](const SkinnedModel& m) {
        double s = 0.0;
        for (const auto& [mesh, pose] : frames) {
            const TriMesh posed = skin(m, pose);
            const SpatialIndex pi(posed), fi(*mesh);
            s += sum_squared_distances(fi, posed.vertices) + sum_squared_distances(pi, mesh->vertices);
        }
        Eigen::MatrixXd D(nv, 3);
        for (std::size_t v = 0; v < nv; ++v) D.row(v) = (m.mesh.vertices[v] - model.mesh.vertices[v]).transpose();
        return s + lam * (L * D).squaredNorm() + anchor * D.squaredNorm();
    };
    double current_obj = objective(model);
    out.energy_trace.push_back(current_obj);

    SkinnedModel cur = model;
    std::vector<char> frozen(nj, 0);
    bool frozen_decided = false;

    for (int iter = 0; iter < params.shape_iters; ++iter) {
        // Normal equations in increments: vertex blocks (diagonal + per edge),
        // dense vertex-offset coupling and a dense offset block.
        std::vector<Mat3> Hvv(nv, Mat3::Zero());
        std::vector<Mat3> Hedge(topo.edges.size(), Mat3::Zero());  // block (lo, hi)
        Eigen::MatrixXd Hvo = Eigen::MatrixXd::Zero(3 * nv, 3 * nj);
        Eigen::MatrixXd Hoo = Eigen::MatrixXd::Zero(3 * nj, 3 * nj);
        Eigen::VectorXd gv = Eigen::VectorXd::Zero(3 * nv), go = Eigen::VectorXd::Zero(3 * nj);

        for (const auto& [mesh, pose] : frames) {
            const SkinLinearization lin = skin_linearization(cur, pose);
            TriMesh posed;
            posed.vertices = lin.positions;
            posed.faces = cur.mesh.faces;
            const std::vector<Vec3> pn = vertex_normals(posed);
            const std::vector<Vec3> fn = vertex_normals(*mesh);
            const SpatialIndex fi(*mesh), pi(posed);

            // A residual r = sum_c b_c x_c - q over up to three model vertices.
            auto add = [&](const int* ids, const double* b, int count, const Vec3& r) {
                std::vector<std::pair<int, Mat3>> off;  // combined offset blocks
                for (int a = 0; a < count; ++a)
                    for (const auto& [k, m] : lin.offset_jacobian[ids[a]]) {
                        bool found = false;
                        for (auto& [kk, mm] : off)
                            if (kk == k) {
                                mm += b[a] * m;
                                found = true;
                            }
                        if (!found) off.emplace_back(k, b[a] * m);
                    }
                for (int a = 0; a < count; ++a) {
                    const Mat3 Ja = b[a] * lin.vertex_jacobian[ids[a]];
                    gv.segment<3>(3 * ids[a]) += Ja.transpose() * r;
                    for (int c = 0; c < count; ++c) {
                        const Mat3 Jc = b[c] * lin.vertex_jacobian[ids[c]];
                        if (ids[a] == ids[c]) {
                            Hvv[ids[a]] += Ja.transpose() * Jc;
                        }
                    }
                    for (const auto& [k, m] : off) Hvo.block<3, 3>(3 * ids[a], 3 * k) += Ja.transpose() * m;
                }
                for (const auto& [k, m] : off) {
                    go.segment<3>(3 * k) += m.transpose() * r;
                    for (const auto& [k2, m2] : off) Hoo.block<3, 3>(3 * k, 3 * k2) += m.transpose() * m2;
                }
            };

            const auto fwd = closest_points_within(fi, lin.positions, params.max_distance);
            for (std::size_t v = 0; v < nv; ++v) {
                if (!fwd[v]) continue;
                const Vec3 n = interpolated_normal(fn, mesh->faces[fwd[v]->face], fwd[v]->bary);
                if (n.dot(pn[v]) < cos_gate) continue;
                const int id = static_cast<int>(v);
                const double one = 1.0;
                add(&id, &one, 1, lin.positions[v] - fwd[v]->point);
            }
            const auto rev = closest_points_within(pi, mesh->vertices, params.max_distance);
            for (std::size_t u = 0; u < mesh->vertices.size(); ++u) {
                if (!rev[u]) continue;
                const Face& f = cur.mesh.faces[rev[u]->face];
                const Vec3 n = interpolated_normal(pn, f, rev[u]->bary);
                if (n.dot(fn[u]) < cos_gate) continue;
                const double b[3] = {rev[u]->bary[0], rev[u]->bary[1], rev[u]->bary[2]};
                add(f.data(), b, 3, rev[u]->point - mesh->vertices[u]);
                // Off-diagonal vertex blocks of this face, stored per edge.
                const std::size_t fid = static_cast<std::size_t>(rev[u]->face);
                for (int k = 0; k < 3; ++k) {
                    const int i = f[(k + 1) % 3], j = f[(k + 2) % 3];
                    const double bi = b[(k + 1) % 3], bj = b[(k + 2) % 3];
                    const Mat3 Ji = bi * lin.vertex_jacobian[i], Jj = bj * lin.vertex_jacobian[j];
                    const int e = topo.face_edges[fid][k];
                    Hedge[e] += (i < j) ? Mat3(Ji.transpose() * Jj) : Mat3(Jj.transpose() * Ji);
                }
            }
        }

        if (!frozen_decided) {
            double scale = 0.0;
            std::vector<double> min_eig(nj);
            for (std::size_t k = 0; k < nj; ++k) {
                Eigen::SelfAdjointEigenSolver<Mat3> es(Mat3(Hoo.block<3, 3>(3 * k, 3 * k)));
                min_eig[k] = es.eigenvalues()[0];
                scale = std::max(scale, es.eigenvalues()[2]);
            }
            for (std::size_t k = 0; k < nj; ++k)
                if (!(min_eig[k] > 1e-6 * scale) || scale <= 0.0) {
                    frozen[k] = 1;
                    out.frozen_joints.push_back(static_cast<int>(k));
                    out.warnings.push_back("adapt_shape: rest offset of joint '" + cur.skeleton.joints[k].name +
                                           "' is not determined by the frames; frozen");
                }
            frozen_decided = true;
        }

        // Laplacian regularizer and positional anchor, per coordinate.
        Eigen::MatrixXd Vc(nv, 3);
        for (std::size_t v = 0; v < nv; ++v) Vc.row(v) = cur.mesh.vertices[v].transpose();
        const Eigen::MatrixXd D = Vc - V0;
        const Eigen::MatrixXd LD = LtL * D;
        for (std::size_t v = 0; v < nv; ++v)
            gv.segment<3>(3 * v) += lam * LD.row(v).transpose() + anchor * D.row(v).transpose();

        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(nv * 9 + topo.edges.size() * 18 + LtL.nonZeros() * 3);
        for (std::size_t v = 0; v < nv; ++v)
            for (int a = 0; a < 3; ++a)
                for (int c = 0; c < 3; ++c) {
                    double val = Hvv[v](a, c);
                    if (a == c) val += anchor + 1e-12;
                    trip.emplace_back(3 * v + a, 3 * v + c, val);
                }
        for (std::size_t e = 0; e < topo.edges.size(); ++e) {
            const auto [i, j] = topo.edges[e];
            for (int a = 0; a < 3; ++a)
                for (int c = 0; c < 3; ++c) {
                    trip.emplace_back(3 * i + a, 3 * j + c, Hedge[e](a, c));
                    trip.emplace_back(3 * j + c, 3 * i + a, Hedge[e](a, c));
                }
        }
        for (int k = 0; k < LtL.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(LtL, k); it; ++it)
                for (int a = 0; a < 3; ++a) trip.emplace_back(3 * it.row() + a, 3 * it.col() + a, lam * it.value());
        Eigen::SparseMatrix<double> Hs(3 * nv, 3 * nv);
        Hs.setFromTriplets(trip.begin(), trip.end());

        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(Hs);
        if (solver.info() != Eigen::Success) {
            out.warnings.push_back("adapt_shape: vertex system factorization failed; stopping");
            break;
        }

        // Schur complement on the free offsets.
        std::vector<int> free_cols;
        for (std::size_t k = 0; k < nj; ++k)
            if (!frozen[k])
                for (int a = 0; a < 3; ++a) free_cols.push_back(static_cast<int>(3 * k + a));
        const int nf = static_cast<int>(free_cols.size());
        Eigen::VectorXd dv, dof = Eigen::VectorXd::Zero(3 * nj);
        if (nf > 0) {
            Eigen::MatrixXd B(3 * nv, nf);
            Eigen::MatrixXd C(nf, nf);
            Eigen::VectorXd gf(nf);
            for (int a = 0; a < nf; ++a) {
                B.col(a) = Hvo.col(free_cols[a]);
                gf[a] = go[free_cols[a]];
                for (int c = 0; c < nf; ++c) C(a, c) = Hoo(free_cols[a], free_cols[c]);
            }
            const Eigen::MatrixXd HinvB = solver.solve(B);
            const Eigen::VectorXd Hinvg = solver.solve(gv);
            Eigen::MatrixXd S = C - B.transpose() * HinvB;
            S.diagonal().array() += 1e-12 * std::max(1.0, S.diagonal().cwiseAbs().maxCoeff());
            const Eigen::VectorXd rhs = -(gf - B.transpose() * Hinvg);
            const Eigen::VectorXd x = S.ldlt().solve(rhs);
            for (int a = 0; a < nf; ++a) dof[free_cols[a]] = x[a];
            dv = -Hinvg - HinvB * x;
        } else {
            dv = -solver.solve(gv);
        }
        if (!dv.allFinite() || !dof.allFinite()) {
            out.warnings.push_back("adapt_shape: non-finite update; stopping");
            break;
        }

        SkinnedModel next = cur;
        for (std::size_t v = 0; v < nv; ++v) next.mesh.vertices[v] += dv.segment<3>(3 * v);
        for (std::size_t k = 0; k < nj; ++k) next.skeleton.joints[k].offset += dof.segment<3>(3 * k);

        const double obj = objective(next);
        if (!(obj < current_obj)) break;
        current_obj = obj;
        out.energy_trace.push_back(obj);
        cur = std::move(next);
        out.model = cur;
        const double step = std::sqrt(dv.squaredNorm() / std::max<std::size_t>(1, nv));
        if (step < params.convergence_tol) break;
    }
    out.residual_after = shape_residual_impl(out.model, frames);
    return out;
}

PoseTrack track_poses(const SkinnedModel& model, const std::vector<const TriMesh*>& frames,
                      const SwingTwistPose& init0, const PosePriorGMM* prior, const FitParams& params) {
    params.validate();
    model.validate();
    PoseTrack track;
    track.model = model;

    auto fit_all = [&](const SkinnedModel& m) {
        std::vector<FitResult> fits;
        SwingTwistPose start = init0;
        for (std::size_t t = 0; t < frames.size(); ++t) {
            FitResult r;
            try {
                r = fit_pose(m, *frames[t], start, prior, params);
                start = r.pose;
            } catch (const NumericalError& e) {
                r.ok = false;
                r.failure = e.what();
                r.pose = start;
                track.warnings.push_back("frame " + std::to_string(t) + ": " + e.what());
            }
            fits.push_back(std::move(r));
        }
        return fits;
    };

    track.fits = fit_all(track.model);
    if (!params.adapt_shape || params.alternation_rounds == 0) return track;
    for (int round = 0; round < params.alternation_rounds; ++round) {
        FrameList list;
        for (std::size_t t = 0; t < frames.size(); ++t)
            if (track.fits[t].ok) list.emplace_back(frames[t], track.fits[t].pose);
        if (list.empty()) break;
        ShapeResult sr = adapt_shape(track.model, list, params);
        for (auto& w : sr.warnings)
            if (std::find(track.warnings.begin(), track.warnings.end(), w) == track.warnings.end())
                track.warnings.push_back(w);
        track.model = std::move(sr.model);
        track.fits = fit_all(track.model);
    }
    return track;
}

}  // namespace vva
