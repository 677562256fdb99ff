#pragma once

#include "fmprog/umap/graph.hpp"

#include <cstdint>
#include <vector>

namespace fmprog::umap {

struct SpectralDiagnostics {
    int components = 0;
    int spectral_components = 0;  // solved via eigenvectors
    int random_components = 0;    // too small, or eigensolver failed
};

/// Labels each vertex with its connected component; ids follow the lowest vertex index.
std::vector<int> connected_components(const SparseGraph& a, int* count = nullptr);

/// Eigenvectors 1..dim of the symmetric normalised Laplacian, per connected component.
/// Components are placed in disjoint cells of [-10, 10]^dim. Maximum |coordinate| is 10
/// before a uniform jitter of at most 1e-4.
RowMatrix spectral_init(const SparseGraph& a, int dim, std::uint64_t seed, SpectralDiagnostics* diagnostics = nullptr);

/// The unjittered layout, exposed for tests of the jitter bound.
RowMatrix spectral_init_exact(const SparseGraph& a, int dim, std::uint64_t seed,
                              SpectralDiagnostics* diagnostics = nullptr);

}  // namespace fmprog::umap
