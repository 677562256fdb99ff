#pragma once

#include "fmprog/umap/knn.hpp"

#include <Eigen/SparseCore>

#include <span>
#include <vector>

namespace fmprog::umap {

using SparseGraph = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

struct SmoothKnnOptions {
    int max_iterations = 64;
    double tolerance = 1e-5;
    double sigma_floor = 1e-3;
};

/// Per-point smooth-kNN normalisers.
struct SmoothKnn {
    std::vector<double> rho;    // smallest strictly positive neighbour distance (0 if none)
    std::vector<double> sigma;
    std::vector<double> weight_sum;     // achieved sum of memberships
    std::vector<std::size_t> floored;   // points whose search failed and took the sigma floor
    double target = 0.0;                // log2(k)
};

struct SigmaSearch {
    double sigma = 1.0;
    double weight_sum = 0.0;
    bool converged = false;
};

/// Bisection for one point: find sigma with sum_j exp(-max(0, d_j - rho) / sigma) = target.
SigmaSearch search_sigma(std::span<const double> distances, double rho, double target,
                         const SmoothKnnOptions& options = {});

SmoothKnn smooth_knn(const NeighborList& neighbors, const SmoothKnnOptions& options = {});
SmoothKnn smooth_knn_serial(const NeighborList& neighbors, const SmoothKnnOptions& options = {});

/// exp(-max(0, d - rho) / sigma)
double membership(double d, double rho, double sigma);

/// Directed membership matrix W, w_ij for j in N(i).
SparseGraph fuzzy_weights(const NeighborList& neighbors, std::span<const double> rho, std::span<const double> sigma);

/// A = W + W^T - W o W^T
SparseGraph symmetrize(const SparseGraph& w);

}  // namespace fmprog::umap
