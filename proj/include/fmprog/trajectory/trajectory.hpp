#pragma once

#include "fmprog/types.hpp"
#include "fmprog/umap/embed.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <vector>

namespace fmprog::trajectory {

/// A unit's embedded path, one row per cycle in increasing cycle order.
struct Trajectory {
    int unit_id = 0;
    RowMatrix points;

    int length() const { return static_cast<int>(points.rows()); }
};

/// Groups embedding rows by unit and sorts by cycle. Cycles must be 1..T_i without gaps.
std::vector<Trajectory> build_trajectories(const umap::Embedding& embedding);

/// Dynamic time warping with Euclidean point cost, full window, steps (1,0), (0,1), (1,1).
double dtw(const RowMatrix& p, const RowMatrix& q);
inline double dtw(const Trajectory& p, const Trajectory& q) { return dtw(p.points, q.points); }

/// Symmetric pairwise DTW matrix; OpenMP over rows.
Eigen::MatrixXd dtw_matrix(std::span<const Trajectory> trajectories);
Eigen::MatrixXd dtw_matrix_serial(std::span<const Trajectory> trajectories);

/// Linear resampling on the normalised cycle index to `length` points.
RowMatrix resample(const RowMatrix& path, int length);

/// Median of member lengths (lower median for an even count).
int median_length(std::span<const RowMatrix* const> members);

/// Pointwise mean of the members after resampling each to target_len (median length when 0).
RowMatrix mean_trajectory(std::span<const RowMatrix* const> members, int target_len = 0);

/// Pointwise mean and spread (root-mean-square distance to the mean) of resampled members.
struct Tube {
    RowMatrix mean;
    Eigen::VectorXd spread;
};
Tube trajectory_tube(std::span<const RowMatrix* const> members, int target_len = 0);

}  // namespace fmprog::trajectory
