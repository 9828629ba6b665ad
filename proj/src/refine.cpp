#include "pnpf/refine.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <vector>

#include "pnpf/geometry.hpp"

namespace pnpf {

std::pair<std::vector<Vec2>, double> residuals_and_cost(const CorrespondenceSet &corrs, const RigidPose &pose,
                                                        double focal, const LossFunction &loss,
                                                        const PinholeCamera &camera_geom) {
    const PinholeCamera cam = camera_geom.with_focal(focal);
    std::vector<Vec2> residuals;
    residuals.reserve(corrs.size());
    double total = 0;
    for (const Correspondence &c : corrs) {
        const Vec2 r = project(cam, pose, c.point3) - c.point2;
        residuals.push_back(r);
        total += loss.value(r.norm());
    }
    return {std::move(residuals), corrs.empty() ? 0.0 : total / static_cast<double>(corrs.size())};
}

namespace {

// Damped block solve of the 1+6K normal equations via a Schur complement on
// the shared focal coordinate: the object-object part is block-diagonal, so
// the system is never assembled densely. Parameter layout per object:
// [axis-angle increment (right-multiplied), translation]; log-focal last.
struct NormalEquations {
    std::vector<Eigen::Matrix<double, 6, 6>> H_pp;  // per object
    std::vector<Eigen::Matrix<double, 6, 1>> g_p;
    std::vector<Eigen::Matrix<double, 6, 1>> H_pf;  // pose-focal coupling
    double H_ff = 0;
    double g_f = 0;
    bool with_focal = false;

    // Returns false when the damped system is not positive definite enough
    // to produce a finite step (caller raises damping).
    bool solve(double lambda, std::vector<Eigen::Matrix<double, 6, 1>> &delta_p, double &delta_f) const {
        const size_t K = H_pp.size();
        std::vector<Eigen::LDLT<Eigen::Matrix<double, 6, 6>>> fact(K);
        for (size_t o = 0; o < K; ++o) {
            Eigen::Matrix<double, 6, 6> D = H_pp[o];
            for (int i = 0; i < 6; ++i) D(i, i) += lambda * std::max(D(i, i), 1e-12);
            fact[o].compute(D);
            if (fact[o].info() != Eigen::Success) return false;
        }
        delta_f = 0;
        if (with_focal) {
            double schur = H_ff + lambda * std::max(H_ff, 1e-12);
            double rhs = -g_f;
            for (size_t o = 0; o < K; ++o) {
                const auto Dinv_b = fact[o].solve(H_pf[o]);
                schur -= H_pf[o].dot(Dinv_b);
                rhs += H_pf[o].dot(fact[o].solve(g_p[o]));
            }
            if (!(schur > 0) || !std::isfinite(schur)) return false;
            delta_f = rhs / schur;
        }
        delta_p.resize(K);
        for (size_t o = 0; o < K; ++o) {
            Eigen::Matrix<double, 6, 1> rhs = -g_p[o];
            if (with_focal) rhs -= H_pf[o] * delta_f;
            delta_p[o] = fact[o].solve(rhs);
            if (!delta_p[o].allFinite()) return false;
        }
        return std::isfinite(delta_f);
    }
};

struct EngineState {
    std::vector<RigidPose> poses;
    double log_f = 0;
};

struct EngineResult {
    EngineState state;
    double initial_cost = 0, final_cost = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> per_iteration_cost;
};

// Total cost: mean over objects of the per-object Eq.-style mean.
double total_cost(const std::vector<const CorrespondenceSet *> &objs, const EngineState &st,
                  const PinholeCamera &geom, const LossFunction &loss) {
    double sum = 0;
    for (size_t o = 0; o < objs.size(); ++o)
        sum += residuals_and_cost(*objs[o], st.poses[o], std::exp(st.log_f), loss, geom).second;
    return sum / static_cast<double>(objs.size());
}

EngineResult lm_solve(const std::vector<const CorrespondenceSet *> &objs, const EngineState &init,
                      const PinholeCamera &geom, const SolverOptions &opts, bool with_focal) {
    const size_t K = objs.size();
    const double lo = std::log(opts.focal_min), hi = std::log(opts.focal_max);

    EngineResult res;
    res.state = init;
    res.state.log_f = std::clamp(init.log_f, lo, hi);

    double cost = total_cost(objs, res.state, geom, opts.loss);  // cheirality at init propagates
    res.initial_cost = cost;
    res.per_iteration_cost.push_back(cost);

    double lambda = opts.initial_damping;
    int consecutive_rejects = 0;

    NormalEquations eq;
    eq.with_focal = with_focal;
    eq.H_pp.resize(K);
    eq.g_p.resize(K);
    eq.H_pf.resize(K);

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        res.iterations = iter + 1;

        const PinholeCamera cam = geom.with_focal(std::exp(res.state.log_f));
        eq.H_ff = 0;
        eq.g_f = 0;
        for (size_t o = 0; o < K; ++o) {
            eq.H_pp[o].setZero();
            eq.g_p[o].setZero();
            eq.H_pf[o].setZero();
            const double sigma = 1.0 / (static_cast<double>(K) * static_cast<double>(objs[o]->size()));
            for (const Correspondence &c : *objs[o]) {
                const auto J = projection_jacobian(cam, res.state.poses[o], c.point3, with_focal);
                const Vec2 r = project(cam, res.state.poses[o], c.point3) - c.point2;
                const double w = sigma * opts.loss.weight(r.norm());
                const auto Jp = J.template leftCols<6>();
                eq.H_pp[o].noalias() += w * Jp.transpose() * Jp;
                eq.g_p[o].noalias() += w * Jp.transpose() * r;
                if (with_focal) {
                    const Vec2 Jf = J.col(6);
                    eq.H_ff += w * Jf.squaredNorm();
                    eq.H_pf[o].noalias() += w * Jp.transpose() * Jf;
                    eq.g_f += w * Jf.dot(r);
                }
            }
        }

        bool accepted = false;
        while (!accepted) {
            std::vector<Eigen::Matrix<double, 6, 1>> delta_p;
            double delta_f = 0;
            bool ok = eq.solve(lambda, delta_p, delta_f);

            if (ok) {
                double step2 = delta_f * delta_f;
                for (const auto &d : delta_p) step2 += d.squaredNorm();
                if (std::sqrt(step2) < opts.step_tol) {
                    res.converged = true;
                    break;
                }

                EngineState trial;
                trial.poses.reserve(K);
                for (size_t o = 0; o < K; ++o) {
                    RigidPose p;
                    p.rotation = res.state.poses[o].rotation * Rotation::from_axis_angle(delta_p[o].head<3>());
                    p.translation = res.state.poses[o].translation + delta_p[o].tail<3>();
                    trial.poses.push_back(p);
                }
                trial.log_f = std::clamp(res.state.log_f + delta_f, lo, hi);

                double trial_cost = 0;
                bool feasible = true;
                try {
                    trial_cost = total_cost(objs, trial, geom, opts.loss);
                } catch (const CheiralityViolation &) {
                    feasible = false;  // step walked behind the camera: retreat
                }

                if (feasible && trial_cost < cost) {
                    const double drop = cost - trial_cost;
                    res.state = std::move(trial);
                    cost = trial_cost;
                    res.per_iteration_cost.push_back(cost);
                    lambda *= opts.damping_down;
                    consecutive_rejects = 0;
                    accepted = true;
                    if (drop <= opts.cost_rel_tol * std::max(cost, DBL_MIN)) res.converged = true;
                    break;
                }
            }

            lambda *= opts.damping_up;
            if (++consecutive_rejects >= 20)
                throw DivergedError("no step accepted after 20 consecutive damping increases");
        }
        if (res.converged) break;
    }

    res.final_cost = cost;
    return res;
}

SolveResult pack_single(const CorrespondenceSet &corrs, const EngineResult &er) {
    SolveResult out;
    out.pose = er.state.poses[0];
    out.focal_px = std::exp(er.state.log_f);
    out.initial_cost = er.initial_cost;
    out.final_cost = er.final_cost;
    out.iterations = er.iterations;
    out.converged = er.converged;
    out.per_iteration_cost = er.per_iteration_cost;
    out.inlier_mask.assign(corrs.size(), true);
    return out;
}

}  // namespace

SolveResult refine_joint(const CorrespondenceSet &corrs, const RigidPose &init, double init_focal,
                         const PinholeCamera &camera_geom, const SolverOptions &opts) {
    opts.validate();
    if (corrs.size() < 4)
        throw NotEnoughCorrespondences("joint refinement needs at least 4 correspondences");
    if (!(init_focal > 0)) throw DomainError("initial focal length must be positive");

    EngineState st;
    st.poses = {init};
    st.log_f = std::log(init_focal);
    const EngineResult er = lm_solve({&corrs}, st, camera_geom, opts, opts.refine_focal);
    return pack_single(corrs, er);
}

SolveResult refine_pose_fixed_focal(const CorrespondenceSet &corrs, const RigidPose &init, double fixed_focal,
                                    const PinholeCamera &camera_geom, const SolverOptions &opts) {
    opts.validate();
    if (corrs.size() < 4)
        throw NotEnoughCorrespondences("pose refinement needs at least 4 correspondences");
    if (!(fixed_focal >= opts.focal_min) || !(fixed_focal <= opts.focal_max))
        throw InvalidOptions("fixed focal length lies outside focal_bounds");

    EngineState st;
    st.poses = {init};
    st.log_f = std::log(fixed_focal);
    const EngineResult er = lm_solve({&corrs}, st, camera_geom, opts, false);
    SolveResult res = pack_single(corrs, er);
    res.focal_px = fixed_focal;  // exact, not exp(log(f))
    return res;
}

MultiObjectResult refine_multi_object(const std::vector<std::pair<CorrespondenceSet, RigidPose>> &objects,
                                      double init_focal, const PinholeCamera &camera_geom,
                                      const SolverOptions &opts) {
    opts.validate();
    if (objects.empty()) throw NotEnoughCorrespondences("multi-object refinement needs at least one object");

    if (objects.size() == 1) {
        MultiObjectResult out;
        out.objects.push_back(refine_joint(objects[0].first, objects[0].second, init_focal, camera_geom, opts));
        out.shared_focal_px = out.objects[0].focal_px;
        return out;
    }

    const size_t K = objects.size();
    size_t total = 0;
    for (const auto &[corrs, pose] : objects) {
        if (corrs.size() < 3)
            throw NotEnoughCorrespondences("each object needs at least 3 correspondences for its 6 parameters");
        total += corrs.size();
    }
    if (total < 4 + 3 * (K - 1))
        throw NotEnoughCorrespondences("1+6N system needs at least 4 + 3(N-1) total correspondences");
    if (!(init_focal > 0)) throw DomainError("initial focal length must be positive");

    std::vector<const CorrespondenceSet *> objs;
    EngineState st;
    for (const auto &[corrs, pose] : objects) {
        objs.push_back(&corrs);
        st.poses.push_back(pose);
    }
    st.log_f = std::log(init_focal);

    const EngineResult er = lm_solve(objs, st, camera_geom, opts, opts.refine_focal);

    MultiObjectResult out;
    out.shared_focal_px = std::exp(er.state.log_f);
    for (size_t o = 0; o < K; ++o) {
        SolveResult r;
        r.pose = er.state.poses[o];
        r.focal_px = out.shared_focal_px;
        r.initial_cost =
            residuals_and_cost(objects[o].first, objects[o].second, init_focal, opts.loss, camera_geom).second;
        r.final_cost =
            residuals_and_cost(objects[o].first, r.pose, r.focal_px, opts.loss, camera_geom).second;
        r.iterations = er.iterations;
        r.converged = er.converged;
        r.per_iteration_cost = er.per_iteration_cost;  // shared total-cost trace
        r.inlier_mask.assign(objects[o].first.size(), true);
        out.objects.push_back(std::move(r));
    }
    return out;
}

}  // namespace pnpf
