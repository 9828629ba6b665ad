#ifndef PNPF_LOSS_HPP
#define PNPF_LOSS_HPP

#include <cmath>

#include "pnpf/errors.hpp"

namespace pnpf {

enum class LossKind {
    Squared,  ///< L(r) = r^2
    Cauchy,   ///< L(r) = ln(1 + (r/s)^2), robust to gross outliers
};

struct LossFunction {
    LossKind kind = LossKind::Squared;
    double scale = 1.0;  ///< Cauchy scale s, in pixels; ignored for Squared.

    static LossFunction squared() { return {LossKind::Squared, 1.0}; }

    static LossFunction cauchy(double scale = 1.0) {
        if (!(scale > 0.0)) throw InvalidOptions("Cauchy scale must be positive");
        return {LossKind::Cauchy, scale};
    }

    /// Loss value for a residual magnitude r >= 0.
    double value(double r) const {
        const double q = r / scale;
        switch (kind) {
            case LossKind::Squared:
                return r * r;
            case LossKind::Cauchy:
                return std::log1p(q * q);
        }
        return r * r;
    }

    /// IRLS weight for the weighted Gauss-Newton step on w * r^2:
    /// Squared -> 1, Cauchy -> 1 / (1 + (r/s)^2). The Cauchy form is
    /// L'(r)/(2r) up to the constant 1/s^2, which cancels in the step.
    double weight(double r) const {
        switch (kind) {
            case LossKind::Squared:
                return 1.0;
            case LossKind::Cauchy: {
                const double q = r / scale;
                return 1.0 / (1.0 + q * q);
            }
        }
        return 1.0;
    }
};

}  // namespace pnpf

#endif
