#include "fmprog/trajectory/trajectory.hpp"

#include "fmprog/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace fmprog::trajectory {

std::vector<Trajectory> build_trajectories(const umap::Embedding& embedding) {
    std::map<int, std::vector<std::size_t>> by_unit;
    for (std::size_t i = 0; i < embedding.size(); ++i) by_unit[embedding.keys[i].unit_id].push_back(i);

    std::vector<Trajectory> out;
    out.reserve(by_unit.size());
    for (auto& [unit, rows] : by_unit) {
        std::sort(rows.begin(), rows.end(),
                  [&](std::size_t a, std::size_t b) { return embedding.keys[a].cycle < embedding.keys[b].cycle; });
        Trajectory t;
        t.unit_id = unit;
        t.points.resize(static_cast<Eigen::Index>(rows.size()), embedding.dim());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const int cycle = embedding.keys[rows[r]].cycle;
            if (cycle != static_cast<int>(r) + 1) {
                throw Error(ErrorKind::Integrity, "build_trajectories: unit " + std::to_string(unit) +
                                                      " has a gap or duplicate at cycle " + std::to_string(cycle));
            }
            t.points.row(static_cast<Eigen::Index>(r)) = embedding.model.points.row(static_cast<Eigen::Index>(rows[r]));
        }
        out.push_back(std::move(t));
    }
    return out;
}

double dtw(const RowMatrix& p, const RowMatrix& q) {
    if (p.rows() == 0 || q.rows() == 0) throw Error(ErrorKind::Contract, "dtw: empty sequence");
    if (p.cols() != q.cols()) throw Error(ErrorKind::Contract, "dtw: dimension mismatch");
    const Eigen::Index n = p.rows(), m = q.rows();
    constexpr double inf = std::numeric_limits<double>::infinity();
    // Two rolling rows of the (n+1) x (m+1) cost table.
    std::vector<double> prev(static_cast<std::size_t>(m + 1), inf), cur(static_cast<std::size_t>(m + 1), inf);
    prev[0] = 0.0;
    for (Eigen::Index i = 1; i <= n; ++i) {
        cur[0] = inf;
        for (Eigen::Index j = 1; j <= m; ++j) {
            const double cost = (p.row(i - 1) - q.row(j - 1)).norm();
            const auto uj = static_cast<std::size_t>(j);
            cur[uj] = cost + std::min({prev[uj], cur[uj - 1], prev[uj - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[static_cast<std::size_t>(m)];
}

Eigen::MatrixXd dtw_matrix_serial(std::span<const Trajectory> trajectories) {
    const auto n = static_cast<Eigen::Index>(trajectories.size());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            d(i, j) = d(j, i) = dtw(trajectories[static_cast<std::size_t>(i)], trajectories[static_cast<std::size_t>(j)]);
        }
    }
    return d;
}

Eigen::MatrixXd dtw_matrix(std::span<const Trajectory> trajectories) {
    const auto n = static_cast<Eigen::Index>(trajectories.size());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
#pragma omp parallel for schedule(dynamic, 1)
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            d(i, j) = dtw(trajectories[static_cast<std::size_t>(i)], trajectories[static_cast<std::size_t>(j)]);
        }
    }
    d.triangularView<Eigen::StrictlyLower>() = d.transpose();
    return d;
}

RowMatrix resample(const RowMatrix& path, int length) {
    if (path.rows() == 0) throw Error(ErrorKind::Contract, "resample: empty path");
    if (length < 1) throw Error(ErrorKind::Parameter, "resample: length must be positive");
    RowMatrix out(length, path.cols());
    const auto last = static_cast<double>(path.rows() - 1);
    for (int k = 0; k < length; ++k) {
        const double s = length == 1 ? 0.0 : last * k / (length - 1);
        const auto lo = static_cast<Eigen::Index>(std::floor(s));
        const auto hi = std::min<Eigen::Index>(lo + 1, path.rows() - 1);
        const double w = s - static_cast<double>(lo);
        out.row(k) = (1.0 - w) * path.row(lo) + w * path.row(hi);
    }
    return out;
}

int median_length(std::span<const RowMatrix* const> members) {
    if (members.empty()) throw Error(ErrorKind::Contract, "median_length: no members");
    std::vector<Eigen::Index> lengths;
    lengths.reserve(members.size());
    for (const auto* m : members) lengths.push_back(m->rows());
    std::sort(lengths.begin(), lengths.end());
    return static_cast<int>(lengths[(lengths.size() - 1) / 2]);
}

RowMatrix mean_trajectory(std::span<const RowMatrix* const> members, int target_len) {
    if (members.empty()) throw Error(ErrorKind::Contract, "mean_trajectory: no members");
    if (target_len <= 0) target_len = median_length(members);
    RowMatrix sum = RowMatrix::Zero(target_len, members.front()->cols());
    for (const auto* m : members) sum += resample(*m, target_len);
    return sum / static_cast<double>(members.size());
}

Tube trajectory_tube(std::span<const RowMatrix* const> members, int target_len) {
    if (members.empty()) throw Error(ErrorKind::Contract, "trajectory_tube: no members");
    if (target_len <= 0) target_len = median_length(members);
    std::vector<RowMatrix> resampled;
    resampled.reserve(members.size());
    for (const auto* m : members) resampled.push_back(resample(*m, target_len));
    Tube tube;
    tube.mean = RowMatrix::Zero(target_len, members.front()->cols());
    for (const auto& r : resampled) tube.mean += r;
    tube.mean /= static_cast<double>(resampled.size());
    tube.spread = Eigen::VectorXd::Zero(target_len);
    for (const auto& r : resampled) tube.spread += (r - tube.mean).rowwise().squaredNorm();
    tube.spread = (tube.spread / static_cast<double>(resampled.size())).cwiseSqrt();
    return tube;
}

}  // namespace fmprog::trajectory
