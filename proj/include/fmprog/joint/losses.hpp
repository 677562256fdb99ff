#pragma once

#include <algorithm>
#include <cmath>
#include <span>

namespace fmprog::joint {

/// Probabilities are floored here before the log.
inline constexpr double kProbabilityFloor = 1e-12;

/// Cross-entropy -sum_v q_v ln p_v with a one-hot or soft target q.
inline double loss_ce(std::span<const double> probabilities, std::span<const double> target) {
    double loss = 0.0;
    for (std::size_t v = 0; v < probabilities.size() && v < target.size(); ++v) {
        if (target[v] != 0.0) loss -= target[v] * std::log(std::max(probabilities[v], kProbabilityFloor));
    }
    return loss;
}

/// Asymmetric exponential RUL loss: late predictions (estimate > truth) use scale 10, early ones 13.
inline double loss_hs(double estimate, double truth) {
    const double e = estimate - truth;
    return e >= 0.0 ? std::expm1(e / 10.0) : std::expm1(-e / 13.0);
}

/// d loss_hs / d estimate.
inline double loss_hs_grad(double estimate, double truth) {
    const double e = estimate - truth;
    return e >= 0.0 ? std::exp(e / 10.0) / 10.0 : -std::exp(-e / 13.0) / 13.0;
}

/// Dead-band penalty on a backward-difference slope: max(0, |slope - zeta| - a).
inline double loss_mono(double slope, double zeta, double a) {
    const double excess = std::abs(slope - zeta) - a;
    return excess > 0.0 ? excess : 0.0;
}

/// d loss_mono / d slope (0 inside the dead band).
inline double loss_mono_grad(double slope, double zeta, double a) {
    if (std::abs(slope - zeta) - a <= 0.0) return 0.0;
    return slope > zeta ? 1.0 : -1.0;
}

}  // namespace fmprog::joint
