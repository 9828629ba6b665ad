#include "pnpf/ransac.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "pnpf/epnp.hpp"
#include "pnpf/geometry.hpp"
#include "pnpf/rng.hpp"

namespace pnpf {

std::pair<double, double> loss_value_and_weight(const LossFunction &loss, double r) {
    if (r < 0) throw DomainError("residual magnitude must be non-negative");
    return {loss.value(r), loss.weight(r)};
}

namespace {

int adaptive_iteration_bound(int best_inliers, int n, int sample_size, double confidence, int cap) {
    const double w = static_cast<double>(best_inliers) / static_cast<double>(n);
    const double p_all_inlier = std::pow(w, sample_size);
    if (p_all_inlier <= 0.0) return cap;
    if (p_all_inlier >= 1.0) return 1;
    const double denom = std::log1p(-p_all_inlier);
    if (denom >= 0.0) return cap;
    const double bound = std::ceil(std::log1p(-confidence) / denom);
    return bound >= static_cast<double>(cap) ? cap : std::max(1, static_cast<int>(bound));
}

}  // namespace

SolveResult solve_ransac(const CorrespondenceSet &corrs, const PinholeCamera &camera, const RansacOptions &opts,
                         const SolverOptions &refine_opts) {
    opts.validate();
    const int n = static_cast<int>(corrs.size());
    if (n < opts.sample_size) throw NotEnoughCorrespondences("fewer correspondences than the RANSAC sample size");

    Rng rng(opts.rng_seed);
    std::vector<int> indices(n);
    std::iota(indices.begin(), indices.end(), 0);

    std::vector<bool> best_mask;
    RigidPose best_pose;
    int best_count = -1;
    double best_mean_dist = 0;

    int iterations_allowed = opts.max_iterations;
    for (int it = 0; it < iterations_allowed; ++it) {
        // Partial Fisher-Yates for a minimal sample without replacement.
        for (int j = 0; j < opts.sample_size; ++j) {
            const auto pick = j + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n - j)));
            std::swap(indices[j], indices[pick]);
        }
        CorrespondenceSet sample;
        sample.reserve(opts.sample_size);
        for (int j = 0; j < opts.sample_size; ++j) sample.push_back(corrs[indices[j]]);

        RigidPose hypothesis;
        try {
            hypothesis = solve_epnp(sample, camera);  // focal stays fixed in the loop
        } catch (const Error &) {
            continue;  // degenerate minimal set
        }

        std::vector<bool> mask(n, false);
        int count = 0;
        double dist_sum = 0;
        for (int i = 0; i < n; ++i) {
            const Vec3 pc = hypothesis.transform(corrs[i].point3);
            if (!(pc.z() > kCheiralityEps)) continue;
            const double d = (project(camera, pc) - corrs[i].point2).norm();
            if (d <= opts.inlier_threshold_px) {
                mask[i] = true;
                ++count;
                dist_sum += d;
            }
        }
        const double mean_dist = count > 0 ? dist_sum / count : 0.0;
        // Earlier hypotheses win exact ties, so the search order is decisive.
        if (count > best_count || (count == best_count && mean_dist < best_mean_dist)) {
            best_count = count;
            best_mean_dist = mean_dist;
            best_mask = std::move(mask);
            best_pose = hypothesis;
            iterations_allowed =
                std::min(opts.max_iterations,
                         std::max(it + 1, adaptive_iteration_bound(best_count, n, opts.sample_size, opts.confidence,
                                                                   opts.max_iterations)));
        }
    }

    if (best_count < opts.sample_size + 2)
        throw NoConsensus("best consensus set is too small to support a solution");

    CorrespondenceSet consensus;
    consensus.reserve(best_count);
    for (int i = 0; i < n; ++i)
        if (best_mask[i]) consensus.push_back(corrs[i]);

    SolveResult result = refine_joint(consensus, best_pose, camera.focal_px, camera, refine_opts);
    result.inlier_mask = std::move(best_mask);
    return result;
}

}  // namespace pnpf
