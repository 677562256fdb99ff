#include "fmprog/umap/curve.hpp"

#include "fmprog/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace fmprog::umap {

double kernel_similarity(double d, double alpha, double beta) {
    return 1.0 / (1.0 + alpha * std::pow(d, beta));
}

double target_similarity(double d, double min_dist) {
    return d <= min_dist ? 1.0 : std::exp(-(d - min_dist));
}

namespace {

struct Grid {
    std::vector<double> d;
    std::vector<double> target;
};

double sse_of(const Grid& g, double alpha, double beta) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.d.size(); ++i) {
        const double r = kernel_similarity(g.d[i], alpha, beta) - g.target[i];
        s += r * r;
    }
    return s;
}

double max_residual_of(const Grid& g, double alpha, double beta) {
    double m = 0.0;
    for (std::size_t i = 0; i < g.d.size(); ++i) {
        m = std::max(m, std::abs(kernel_similarity(g.d[i], alpha, beta) - g.target[i]));
    }
    return m;
}

// Parameters are (u, v) = (ln alpha, ln beta), which keeps both positive.
bool levenberg_marquardt(const Grid& g, int max_iterations, double& alpha, double& beta, int& iterations) {
    double u = std::log(alpha), v = std::log(beta);
    double damping = 1e-3;
    double current = sse_of(g, alpha, beta);
    for (iterations = 1; iterations <= max_iterations; ++iterations) {
        // Normal equations J^T J and J^T r for the 2-parameter model.
        double juu = 0, juv = 0, jvv = 0, gu = 0, gv = 0;
        const double a = std::exp(u), b = std::exp(v);
        for (std::size_t i = 0; i < g.d.size(); ++i) {
            const double d = g.d[i];
            double du = 0.0, dv = 0.0;
            const double p = d > 0.0 ? std::pow(d, b) : 0.0;
            const double f = 1.0 / (1.0 + a * p);
            if (d > 0.0) {
                const double common = -f * f * a * p;
                du = common;                  // d f / d ln(alpha)
                dv = common * b * std::log(d);  // d f / d ln(beta)
            }
            const double r = f - g.target[i];
            juu += du * du;
            juv += du * dv;
            jvv += dv * dv;
            gu += du * r;
            gv += dv * r;
        }
        bool improved = false;
        for (int attempt = 0; attempt < 30; ++attempt) {
            const double auu = juu * (1.0 + damping), avv = jvv * (1.0 + damping);
            const double det = auu * avv - juv * juv;
            if (!(std::abs(det) > 0.0)) {
                damping *= 10.0;
                continue;
            }
            const double su = -(avv * gu - juv * gv) / det;
            const double sv = -(auu * gv - juv * gu) / det;
            const double trial = sse_of(g, std::exp(u + su), std::exp(v + sv));
            if (std::isfinite(trial) && trial <= current) {
                const double drop = current - trial;
                u += su;
                v += sv;
                damping = std::max(damping * 0.3, 1e-12);
                improved = true;
                const bool tiny_step = std::abs(su) < 1e-12 && std::abs(sv) < 1e-12;
                const bool flat = drop <= 1e-15 * std::max(current, 1e-300);
                current = trial;
                if (tiny_step || flat) {
                    alpha = std::exp(u);
                    beta = std::exp(v);
                    return true;
                }
                break;
            }
            damping *= 10.0;
        }
        if (!improved) {
            // No descent direction left at any damping: stationary point.
            alpha = std::exp(u);
            beta = std::exp(v);
            return std::sqrt(gu * gu + gv * gv) < 1e-8;
        }
    }
    alpha = std::exp(u);
    beta = std::exp(v);
    return false;
}

void grid_search(const Grid& g, double& alpha, double& beta) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 200; ++i) {
        const double a = std::pow(10.0, -3.0 + 5.0 * i / 200.0);
        for (int j = 0; j <= 200; ++j) {
            const double b = 0.05 + 9.95 * j / 200.0;
            const double s = sse_of(g, a, b);
            if (s < best) {
                best = s;
                alpha = a;
                beta = b;
            }
        }
    }
}

}  // namespace

CurveParams fit_ab(double min_dist, int samples, int max_iterations) {
    if (!(min_dist > 0.0)) throw Error(ErrorKind::Parameter, "fit_ab: min_dist must be positive");
    if (samples < 3) throw Error(ErrorKind::Parameter, "fit_ab: need at least 3 samples");
    Grid g;
    const double hi = 3.0 * (min_dist + 1.0);
    for (int i = 0; i < samples; ++i) {
        const double d = hi * i / (samples - 1);
        g.d.push_back(d);
        g.target.push_back(target_similarity(d, min_dist));
    }
    CurveParams out;
    out.alpha = 1.0;
    out.beta = 1.0;
    out.converged = levenberg_marquardt(g, max_iterations, out.alpha, out.beta, out.iterations);
    if (!out.converged) {
        spdlog::warn("fit_ab: no convergence after {} iterations (min_dist={}), using grid search", max_iterations,
                     min_dist);
        grid_search(g, out.alpha, out.beta);
    }
    out.sse = sse_of(g, out.alpha, out.beta);
    out.max_residual = max_residual_of(g, out.alpha, out.beta);
    return out;
}

}  // namespace fmprog::umap
