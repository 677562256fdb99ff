#pragma once

#include "fmprog/trajectory/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace fmprog::trajectory {

struct KMeansOptions {
    int n_clusters = 2;
    int restarts = 10;
    int max_iterations = 100;
    double tolerance = 1e-4;  // relative inertia improvement
    std::uint64_t seed = 42;
};

struct RestartRecord {
    std::uint64_t seed = 0;
    int iterations = 0;
    bool converged = false;
    double inertia = 0.0;
    std::vector<double> inertia_history;  // non-increasing
    int reseeded_clusters = 0;
};

struct ClusterResult {
    int n_clusters = 0;
    std::vector<int> unit_ids;      // ascending
    std::vector<int> labels;        // 0-based, parallel to unit_ids; cluster 0 holds the lowest unit id
    std::vector<RowMatrix> centroids;
    double inertia = 0.0;           // sum of squared DTW to the assigned centroid
    std::vector<RestartRecord> restarts;
    int best_restart = 0;

    int label_of(int unit_id) const;
};

/// k-means over trajectories with DTW assignment, resample-and-average centroids and
/// k-means++ seeding on DTW. A centroid update that would raise the inertia ends the restart
/// and keeps the previous state. The best restart by inertia is returned.
ClusterResult dtw_kmeans(std::span<const Trajectory> trajectories, const KMeansOptions& options);

struct ModeCountChoice {
    int n_clusters = 1;
    std::vector<double> inertia;                 // index v-1 for v = 1..max
    std::vector<std::optional<double>> silhouette;  // index v-1; absent for v = 1
    int best_silhouette_clusters = 2;
    double elbow_drop = 0.0;                     // (I1 - I2) / I1
};

/// Automated fallback for choosing the number of failure modes: the silhouette winner over
/// 2..max_clusters, unless the 1 -> 2 relative inertia drop is below elbow_threshold, in which
/// case a single mode is chosen.
ModeCountChoice choose_mode_count(std::span<const Trajectory> trajectories, const KMeansOptions& options,
                                  int max_clusters = 4, double elbow_threshold = 0.5);

void write_labels_csv(const std::filesystem::path& file, const ClusterResult& result);

/// unit_id -> 0-based label.
std::vector<std::pair<int, int>> read_labels_csv(const std::filesystem::path& file);

/// Writes one CSV per cluster (centroid_<v>.csv, v 1-based): index, y_1..y_D, spread.
std::vector<std::filesystem::path> write_centroid_csvs(const std::filesystem::path& dir,
                                                       std::span<const Trajectory> trajectories,
                                                       const ClusterResult& result);

}  // namespace fmprog::trajectory
