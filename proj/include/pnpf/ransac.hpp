#ifndef PNPF_RANSAC_HPP
#define PNPF_RANSAC_HPP

#include <cstdint>
#include <utility>

#include "pnpf/loss.hpp"
#include "pnpf/refine.hpp"
#include "pnpf/types.hpp"

namespace pnpf {

struct RansacOptions {
    int sample_size = 4;
    double inlier_threshold_px = 5.0;
    int max_iterations = 256;
    double confidence = 0.99;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (sample_size < 4) throw InvalidOptions("sample_size must be >= 4 (four-correspondence minimum)");
        if (!(inlier_threshold_px > 0)) throw InvalidOptions("inlier_threshold_px must be positive");
        if (max_iterations < 1) throw InvalidOptions("max_iterations must be >= 1");
        if (!(confidence > 0) || !(confidence < 1)) throw InvalidOptions("confidence must lie in (0, 1)");
    }
};

/// (loss value, IRLS weight) for a residual magnitude r >= 0.
std::pair<double, double> loss_value_and_weight(const LossFunction &loss, double r);

/// Seeded hypothesize-and-verify around EPnP + joint refinement. The focal is
/// held at camera.focal_px inside the hypothesis loop and refined only in the
/// final joint refinement on the consensus set.
SolveResult solve_ransac(const CorrespondenceSet &corrs, const PinholeCamera &camera, const RansacOptions &opts,
                         const SolverOptions &refine_opts);

}  // namespace pnpf

#endif
