#include "fmprog/umap/graph.hpp"

#include "fmprog/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fmprog::umap {

namespace {

double smallest_positive(std::span<const double> distances) {
    for (double d : distances) {
        if (d > 0.0) return d;  // sorted ascending
    }
    return 0.0;
}

void solve_point(const NeighborList& neighbors, std::size_t i, const SmoothKnnOptions& options, SmoothKnn& out,
                 char& floored) {
    const auto dists = neighbors.distances_of(i);
    const double rho = smallest_positive(dists);
    auto search = search_sigma(dists, rho, out.target, options);
    floored = 0;
    if (!search.converged) {
        search.sigma = options.sigma_floor;
        search.weight_sum = 0.0;
        for (double d : dists) search.weight_sum += membership(d, rho, search.sigma);
        floored = 1;
    }
    out.rho[i] = rho;
    out.sigma[i] = search.sigma;
    out.weight_sum[i] = search.weight_sum;
}

SmoothKnn prepare(const NeighborList& neighbors) {
    SmoothKnn out;
    out.target = std::log2(static_cast<double>(neighbors.k));
    out.rho.resize(neighbors.n_points);
    out.sigma.resize(neighbors.n_points);
    out.weight_sum.resize(neighbors.n_points);
    return out;
}

void collect_floored(SmoothKnn& out, const std::vector<char>& flags) {
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i]) out.floored.push_back(i);
    }
}

}  // namespace

double membership(double d, double rho, double sigma) {
    return std::exp(-std::max(0.0, d - rho) / sigma);
}

SigmaSearch search_sigma(std::span<const double> distances, double rho, double target,
                         const SmoothKnnOptions& options) {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double mid = 1.0;
    SigmaSearch result;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        double psum = 0.0;
        for (double d : distances) psum += membership(d, rho, mid);
        result.sigma = mid;
        result.weight_sum = psum;
        if (std::abs(psum - target) < options.tolerance) {
            result.converged = true;
            break;
        }
        if (psum > target) {
            hi = mid;
            mid = 0.5 * (lo + hi);
        } else {
            lo = mid;
            mid = std::isinf(hi) ? mid * 2.0 : 0.5 * (lo + hi);
        }
    }
    return result;
}

SmoothKnn smooth_knn_serial(const NeighborList& neighbors, const SmoothKnnOptions& options) {
    auto out = prepare(neighbors);
    std::vector<char> flags(neighbors.n_points, 0);
    for (std::size_t i = 0; i < neighbors.n_points; ++i) solve_point(neighbors, i, options, out, flags[i]);
    collect_floored(out, flags);
    return out;
}

SmoothKnn smooth_knn(const NeighborList& neighbors, const SmoothKnnOptions& options) {
    auto out = prepare(neighbors);
    std::vector<char> flags(neighbors.n_points, 0);
    const auto n = static_cast<std::ptrdiff_t>(neighbors.n_points);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        solve_point(neighbors, static_cast<std::size_t>(i), options, out, flags[static_cast<std::size_t>(i)]);
    }
    collect_floored(out, flags);
    return out;
}

SparseGraph fuzzy_weights(const NeighborList& neighbors, std::span<const double> rho, std::span<const double> sigma) {
    if (rho.size() != neighbors.n_points || sigma.size() != neighbors.n_points) {
        throw Error(ErrorKind::Contract, "fuzzy_weights: rho/sigma size mismatch");
    }
    const auto n = static_cast<int>(neighbors.n_points);
    std::vector<Eigen::Triplet<double, int>> triplets;
    triplets.reserve(neighbors.index.size());
    for (std::size_t i = 0; i < neighbors.n_points; ++i) {
        const auto idx = neighbors.indices_of(i);
        const auto dst = neighbors.distances_of(i);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            triplets.emplace_back(static_cast<int>(i), idx[r], membership(dst[r], rho[i], sigma[i]));
        }
    }
    SparseGraph w(n, n);
    w.setFromTriplets(triplets.begin(), triplets.end());
    w.makeCompressed();
    return w;
}

SparseGraph symmetrize(const SparseGraph& w) {
    if (w.rows() != w.cols()) throw Error(ErrorKind::Contract, "symmetrize: matrix is not square");
    const SparseGraph wt = w.transpose();
    SparseGraph a = w + wt - SparseGraph(w.cwiseProduct(wt));
    a.prune(0.0, 0.0);
    a.makeCompressed();
    return a;
}

}  // namespace fmprog::umap
