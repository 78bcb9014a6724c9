#pragma once

#include "vva/body_model.hpp"
#include "vva/spatial_index.hpp"

#include <Eigen/Core>
#include <cstdint>
#include <optional>

namespace vva {

/// Diagonal-covariance Gaussian mixture over pose scalars (swing1, swing2,
/// twist of every joint, see pose_scalars).
struct PosePriorGMM {
    std::vector<double> weights;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::VectorXd> variances;

    std::size_t dimension() const { return means.empty() ? 0 : static_cast<std::size_t>(means[0].size()); }
    std::size_t components() const { return weights.size(); }
    void validate() const;
};

/// log sum_k w_k N(x; mu_k, diag(var_k)) via log-sum-exp.
double gmm_logprob(const PosePriorGMM& prior, const Eigen::VectorXd& x);
double gmm_logprob(const PosePriorGMM& prior, const SwingTwistPose& pose);
/// Gradient of -log p at x.
Eigen::VectorXd gmm_neglog_gradient(const PosePriorGMM& prior, const Eigen::VectorXd& x);

/// EM with k-means++ style seeding from `seed`. Variances are floored at
/// `min_variance`.
PosePriorGMM fit_gmm(const std::vector<Eigen::VectorXd>& samples, int components, std::uint64_t seed,
                     int iterations = 100, double min_variance = 1e-6);

enum class BoundsMode { Clamp, Barrier };

struct FitParams {
    double max_distance = 0.1;       // correspondence gate, meters
    double max_normal_angle = 60.0;  // degrees
    double prior_weight = 1e-4;
    double laplacian_weight = 1.0;
    BoundsMode bounds = BoundsMode::Clamp;
    double barrier_weight = 1e-8;
    int max_iters = 60;
    double convergence_tol = 1e-7;  // meters, RMS vertex change of a step
    /// Model vertices used in the pose data term (evenly strided); 0 = all.
    std::size_t max_vertices = 4000;
    int alternation_rounds = 2;
    int shape_iters = 4;
    bool adapt_shape = true;

    void validate() const;
};

struct FitStep {
    double energy_before = 0.0;
    double energy_after = 0.0;
};

struct FitResult {
    SwingTwistPose pose;
    double residual = 0.0;  // RMS model-vertex to frame-surface distance
    std::vector<double> energy_trace;  // energy after every accepted step (first entry: initial)
    std::vector<FitStep> steps;
    int iterations = 0;
    bool converged = false;
    bool ok = true;
    std::string failure;
};

/// Damped Gauss-Newton on sum ||x_v(pose) - closest frame point||^2 over
/// gated model vertices plus prior_weight * (-log GMM). Bounds are enforced
/// after every step. Throws NumericalError("initialization too far") when
/// no correspondence passes the gates.
FitResult fit_pose(const SkinnedModel& model, const TriMesh& frame, const SwingTwistPose& init,
                   const PosePriorGMM* prior, const FitParams& params);

/// RMS distance from every skinned model vertex to the frame surface.
double model_residual(const SkinnedModel& model, const SwingTwistPose& pose, const TriMesh& frame,
                      const SpatialIndex& frame_index);

struct ShapeResult {
    SkinnedModel model;
    double residual_before = 0.0;  // bidirectional RMS over all frames
    double residual_after = 0.0;
    std::vector<double> energy_trace;  // objective of the input, then of every accepted iterate
    std::vector<int> frozen_joints;
    Warnings warnings;
};

/// Refines template vertices and joint rest offsets against posed frames:
/// bidirectional point-to-point data plus laplacian_weight * ||L v - L v0||^2.
/// Joints whose offsets the data cannot determine are frozen with a warning.
/// Never returns a model with a larger residual than the input.
ShapeResult adapt_shape(const SkinnedModel& model, const std::vector<std::pair<const TriMesh*, SwingTwistPose>>& frames,
                        const FitParams& params);

/// Bidirectional RMS residual used by adapt_shape.
double shape_residual(const SkinnedModel& model, const std::vector<std::pair<const TriMesh*, SwingTwistPose>>& frames);

struct PoseTrack {
    std::vector<FitResult> fits;
    SkinnedModel model;  // adapted (or the input model when adaptation is off)
    Warnings warnings;
};

/// Frame t starts from frame t-1's pose. With adaptation on, runs
/// `alternation_rounds` of (fit all poses, adapt shape) and re-fits the poses
/// once with the final model. Failed frames are recorded and tracking
/// continues from the last good pose.
PoseTrack track_poses(const SkinnedModel& model, const std::vector<const TriMesh*>& frames,
                      const SwingTwistPose& init0, const PosePriorGMM* prior, const FitParams& params);

}  // namespace vva
