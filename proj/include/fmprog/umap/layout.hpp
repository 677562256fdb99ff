#pragma once

#include "fmprog/umap/graph.hpp"

#include <cstdint>

namespace fmprog::umap {

struct LayoutOptions {
    double alpha = 1.0;
    double beta = 2.0;
    int epochs = 500;
    double learning_rate = 1.0;
    int negative_sample_rate = 5;
    std::uint64_t seed = 42;
};

struct LayoutStats {
    std::size_t edges = 0;               // directed edges kept after pruning
    std::size_t attractive_updates = 0;
    std::size_t repulsive_updates = 0;
};

/// Cross-entropy SGD with negative sampling. Strictly sequential; bitwise deterministic given
/// the seed. Negative samples come from a counter-based stream keyed by (seed, edge, epoch),
/// so the draw for an edge does not depend on the order edges are visited.
LayoutStats optimize_layout(const SparseGraph& a, RowMatrix& y, const LayoutOptions& options);

/// Same update rule with edges split across OpenMP threads and unsynchronised writes
/// (Hogwild). Identical to optimize_layout on one thread.
LayoutStats optimize_layout_parallel(const SparseGraph& a, RowMatrix& y, const LayoutOptions& options);

}  // namespace fmprog::umap
