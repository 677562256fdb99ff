#pragma once

#include "fmprog/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fmprog::umap {

/// k nearest neighbours per point (self excluded), sorted by ascending distance,
/// ties broken by lower index. Stored row-major: point i owns [i*k, (i+1)*k).
struct NeighborList {
    std::size_t n_points = 0;
    int k = 0;
    std::vector<int> index;
    std::vector<double> distance;

    std::span<const int> indices_of(std::size_t i) const {
        return {index.data() + i * static_cast<std::size_t>(k), static_cast<std::size_t>(k)};
    }
    std::span<const double> distances_of(std::size_t i) const {
        return {distance.data() + i * static_cast<std::size_t>(k), static_cast<std::size_t>(k)};
    }
};

enum class KnnBackend { Exact, Approximate };

/// Exact search. Candidates are screened with a blocked inner-product formulation and the
/// winners re-measured directly, so distances match knn_exact_serial bit for bit.
NeighborList knn_exact(const RowMatrix& points, int k);

/// Reference brute force, one point at a time.
NeighborList knn_exact_serial(const RowMatrix& points, int k);

/// NN-descent. Same contract as the exact search; results are approximate.
NeighborList knn_approx(const RowMatrix& points, int k, std::uint64_t seed, int max_iterations = 12);

NeighborList knn_graph(const RowMatrix& points, int k, KnnBackend backend = KnnBackend::Exact,
                       std::uint64_t seed = 42);

/// Euclidean distance, accumulated in index order.
double euclidean(const double* a, const double* b, Eigen::Index dim);

}  // namespace fmprog::umap
