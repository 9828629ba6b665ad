#ifndef PNPF_REFINE_HPP
#define PNPF_REFINE_HPP

#include <utility>
#include <vector>

#include "pnpf/loss.hpp"
#include "pnpf/types.hpp"

namespace pnpf {

struct SolverOptions {
    LossFunction loss = LossFunction::squared();
    int max_iterations = 100;
    double cost_rel_tol = 1e-10;
    double step_tol = 1e-12;
    double initial_damping = 1e-3;
    double damping_up = 10.0;
    double damping_down = 0.1;
    bool refine_focal = true;
    double focal_min = 50.0;
    double focal_max = 50000.0;

    void validate() const {
        if (max_iterations < 1) throw InvalidOptions("max_iterations must be >= 1");
        if (!(cost_rel_tol > 0) || !(step_tol > 0)) throw InvalidOptions("tolerances must be positive");
        if (!(initial_damping > 0)) throw InvalidOptions("initial_damping must be positive");
        if (!(damping_up > 1) || !(damping_down > 0) || !(damping_down < 1))
            throw InvalidOptions("damping factors must bracket 1");
        if (!(focal_min > 0) || !(focal_min < focal_max)) throw InvalidOptions("focal bounds must satisfy 0 < min < max");
    }
};

struct SolveResult {
    RigidPose pose;
    double focal_px = 0;
    double final_cost = 0;
    double initial_cost = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<bool> inlier_mask;  // all-true outside RANSAC
    std::vector<double> per_iteration_cost;
};

/// Residuals (predicted - observed, px) and the mean robust cost
/// (1/N) * sum_i L(||residual_i||).
std::pair<std::vector<Vec2>, double> residuals_and_cost(const CorrespondenceSet &corrs, const RigidPose &pose,
                                                        double focal, const LossFunction &loss,
                                                        const PinholeCamera &camera_geom);

/// Joint Levenberg-Marquardt refinement of rotation, translation, and
/// log-focal (7 parameters). Cauchy loss runs as IRLS-weighted LM with
/// trust-region acceptance on the true robust cost.
SolveResult refine_joint(const CorrespondenceSet &corrs, const RigidPose &init, double init_focal,
                         const PinholeCamera &camera_geom, const SolverOptions &opts);

/// Pose-only refinement at a caller-fixed focal length (6 parameters).
SolveResult refine_pose_fixed_focal(const CorrespondenceSet &corrs, const RigidPose &init, double fixed_focal,
                                    const PinholeCamera &camera_geom, const SolverOptions &opts);

struct MultiObjectResult {
    std::vector<SolveResult> objects;
    double shared_focal_px = 0;
};

/// Joint refinement of N objects sharing one focal length: 1 + 6N parameters,
/// cost = mean of per-object mean costs. N=1 reduces to refine_joint.
MultiObjectResult refine_multi_object(const std::vector<std::pair<CorrespondenceSet, RigidPose>> &objects,
                                      double init_focal, const PinholeCamera &camera_geom, const SolverOptions &opts);

}  // namespace pnpf

#endif
