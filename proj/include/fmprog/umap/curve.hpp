#pragma once

namespace fmprog::umap {

/// Low-dimensional similarity kernel b'(d) = 1 / (1 + alpha d^beta).
struct CurveParams {
    double alpha = 0.0;
    double beta = 0.0;
    double max_residual = 0.0;  // max |b' - b| over the fitting grid
    double sse = 0.0;
    int iterations = 0;
    bool converged = false;     // false when the grid-search fallback was used
};

double kernel_similarity(double d, double alpha, double beta);

/// Piecewise target: 1 for d <= min_dist, exp(-(d - min_dist)) beyond.
double target_similarity(double d, double min_dist);

/// Damped least squares (Levenberg-Marquardt in log-parameters) on
/// d in [0, 3 (min_dist + 1)] sampled at `samples` points.
CurveParams fit_ab(double min_dist, int samples = 300, int max_iterations = 500);

}  // namespace fmprog::umap
