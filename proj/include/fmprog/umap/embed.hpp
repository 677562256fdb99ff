#pragma once

#include "fmprog/dataset/cmapss.hpp"
#include "fmprog/umap/curve.hpp"
#include "fmprog/umap/graph.hpp"
#include "fmprog/umap/knn.hpp"
#include "fmprog/umap/layout.hpp"
#include "fmprog/umap/spectral.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace fmprog::umap {

struct UmapConfig {
    int n_neighbors = 80;
    double min_dist = 1.0;
    int n_components = 2;
    int epochs = 500;
    double learning_rate = 1.0;
    int negative_sample_rate = 5;
    std::uint64_t seed = 42;
    KnnBackend knn = KnnBackend::Exact;
    bool parallel_layout = false;  // Hogwild layout; off keeps runs bitwise reproducible
};

/// High-dimensional fuzzy graph.
struct NeighborGraph {
    NeighborList neighbors;
    SmoothKnn smooth;
    SparseGraph directed;   // W
    SparseGraph adjacency;  // A
};

NeighborGraph build_graph(const RowMatrix& points, const UmapConfig& config);

struct LayoutModel {
    RowMatrix points;  // N x D
    CurveParams curve;
    double min_dist = 1.0;
    LayoutOptions optimizer;
    SpectralDiagnostics init;
    LayoutStats stats;
};

struct Embedding {
    std::vector<RowKey> keys;  // one per input row, in input order
    std::vector<double> rul;   // optional; empty when unknown
    LayoutModel model;
    std::size_t sigma_floor_count = 0;

    int dim() const { return static_cast<int>(model.points.cols()); }
    std::size_t size() const { return keys.size(); }
};

/// Full two-phase projection. Rows are processed in key order so that the result is
/// equivariant under any permutation of the input rows; keys must be unique.
Embedding embed(const RowMatrix& rows, const std::vector<RowKey>& keys, const UmapConfig& config);

/// Stacks every cycle of every unit (already filtered and normalised) and embeds them.
Embedding embed_units(const std::vector<dataset::UnitSeries>& units, const UmapConfig& config);

/// CSV: unit_id, cycle, rul, y_1..y_D.
void write_embedding_csv(const std::filesystem::path& file, const Embedding& embedding);
Embedding read_embedding_csv(const std::filesystem::path& file);

}  // namespace fmprog::umap
