#include "fmprog/trajectory/clustering.hpp"

#include "fmprog/csv.hpp"
#include "fmprog/error.hpp"
#include "fmprog/eval/metrics.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace fmprog::trajectory {

namespace {

struct State {
    std::vector<int> labels;
    std::vector<RowMatrix> centroids;
    std::vector<double> distance;  // to the assigned centroid
    double inertia = 0.0;
};

std::vector<int> kmeanspp_seeds(const Eigen::MatrixXd& d, int k, std::mt19937_64& rng) {
    const auto n = static_cast<int>(d.rows());
    std::vector<int> seeds;
    seeds.push_back(std::uniform_int_distribution<int>(0, n - 1)(rng));
    std::vector<double> nearest(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) nearest[static_cast<std::size_t>(i)] = d(i, seeds.front());
    while (static_cast<int>(seeds.size()) < k) {
        std::vector<double> w(nearest.size());
        std::transform(nearest.begin(), nearest.end(), w.begin(), [](double x) { return x * x; });
        for (int s : seeds) w[static_cast<std::size_t>(s)] = 0.0;
        int next = 0;
        if (std::accumulate(w.begin(), w.end(), 0.0) > 0.0) {
            next = std::discrete_distribution<int>(w.begin(), w.end())(rng);
        } else {
            // All remaining trajectories coincide with a seed; take the first unused one.
            while (std::find(seeds.begin(), seeds.end(), next) != seeds.end()) ++next;
        }
        seeds.push_back(next);
        for (int i = 0; i < n; ++i) {
            nearest[static_cast<std::size_t>(i)] = std::min(nearest[static_cast<std::size_t>(i)], d(i, next));
        }
    }
    return seeds;
}

void assign(std::span<const Trajectory> trajs, State& s) {
    const auto n = static_cast<std::ptrdiff_t>(trajs.size());
    s.labels.assign(trajs.size(), 0);
    s.distance.assign(trajs.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (std::size_t c = 0; c < s.centroids.size(); ++c) {
            const double dist = dtw(trajs[static_cast<std::size_t>(i)].points, s.centroids[c]);
            if (dist < best) {
                best = dist;
                arg = static_cast<int>(c);
            }
        }
        s.labels[static_cast<std::size_t>(i)] = arg;
        s.distance[static_cast<std::size_t>(i)] = best;
    }
}

// Moves the farthest trajectory (that is not alone in its cluster) into each empty cluster.
int reseed_empty(std::span<const Trajectory> trajs, State& s) {
    const auto k = s.centroids.size();
    int reseeded = 0;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<int> sizes(k, 0);
        for (int l : s.labels) ++sizes[static_cast<std::size_t>(l)];
        if (sizes[c] > 0) continue;
        int far = -1;
        for (std::size_t i = 0; i < trajs.size(); ++i) {
            if (sizes[static_cast<std::size_t>(s.labels[i])] < 2) continue;
            if (far < 0 || s.distance[i] > s.distance[static_cast<std::size_t>(far)]) far = static_cast<int>(i);
        }
        if (far < 0) throw Error(ErrorKind::Numerical, "dtw_kmeans: cannot refill an empty cluster");
        s.centroids[c] = trajs[static_cast<std::size_t>(far)].points;
        s.labels[static_cast<std::size_t>(far)] = static_cast<int>(c);
        s.distance[static_cast<std::size_t>(far)] = 0.0;
        ++reseeded;
    }
    return reseeded;
}

double inertia_of(const State& s) {
    double sum = 0.0;
    for (double d : s.distance) sum += d * d;
    return sum;
}

std::vector<RowMatrix> update_centroids(std::span<const Trajectory> trajs, const std::vector<int>& labels, int k) {
    std::vector<std::vector<const RowMatrix*>> members(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < trajs.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(&trajs[i].points);
    std::vector<RowMatrix> out;
    out.reserve(members.size());
    for (const auto& m : members) out.push_back(mean_trajectory(m));
    return out;
}

State run_restart(std::span<const Trajectory> trajs, const Eigen::MatrixXd& d, const KMeansOptions& o,
                  RestartRecord& record) {
    std::mt19937_64 rng(record.seed);
    State s;
    for (int idx : kmeanspp_seeds(d, o.n_clusters, rng)) s.centroids.push_back(trajs[static_cast<std::size_t>(idx)].points);
    // The seed assignment only provides the first partition; tracked states all use mean centroids.
    assign(trajs, s);
    record.reseeded_clusters += reseed_empty(trajs, s);
    s.centroids = update_centroids(trajs, s.labels, o.n_clusters);

    State prev;
    bool have_prev = false;
    for (int it = 1; it <= o.max_iterations; ++it) {
        record.iterations = it;
        assign(trajs, s);
        record.reseeded_clusters += reseed_empty(trajs, s);
        s.inertia = inertia_of(s);
        if (have_prev && s.inertia > prev.inertia) {
            // Resample-and-average centroids are not exact minimisers; keep the better state.
            s = std::move(prev);
            record.converged = true;
            break;
        }
        record.inertia_history.push_back(s.inertia);
        if (have_prev && (s.labels == prev.labels || prev.inertia - s.inertia < o.tolerance * prev.inertia)) {
            record.converged = true;
            break;
        }
        prev = s;
        have_prev = true;
        s.centroids = update_centroids(trajs, s.labels, o.n_clusters);
    }
    record.inertia = s.inertia;
    return s;
}

}  // namespace

int ClusterResult::label_of(int unit_id) const {
    const auto it = std::lower_bound(unit_ids.begin(), unit_ids.end(), unit_id);
    if (it == unit_ids.end() || *it != unit_id) {
        throw Error(ErrorKind::Contract, "cluster result has no unit " + std::to_string(unit_id));
    }
    return labels[static_cast<std::size_t>(it - unit_ids.begin())];
}

ClusterResult dtw_kmeans(std::span<const Trajectory> trajectories, const KMeansOptions& options) {
    const auto n = static_cast<int>(trajectories.size());
    if (options.n_clusters < 1 || options.n_clusters > n) {
        throw Error(ErrorKind::Parameter, "dtw_kmeans: need 1 <= clusters <= trajectories (" +
                                              std::to_string(options.n_clusters) + " vs " + std::to_string(n) + ")");
    }
    if (options.restarts < 1 || options.max_iterations < 1) {
        throw Error(ErrorKind::Parameter, "dtw_kmeans: restarts and max_iterations must be positive");
    }

    // Canonical order by unit id so that the input order cannot influence the result.
    std::vector<Trajectory> trajs(trajectories.begin(), trajectories.end());
    std::sort(trajs.begin(), trajs.end(), [](const auto& a, const auto& b) { return a.unit_id < b.unit_id; });
    for (std::size_t i = 1; i < trajs.size(); ++i) {
        if (trajs[i].unit_id == trajs[i - 1].unit_id) {
            throw Error(ErrorKind::Integrity, "dtw_kmeans: duplicate unit " + std::to_string(trajs[i].unit_id));
        }
    }
    const Eigen::MatrixXd d = dtw_matrix(trajs);

    ClusterResult result;
    result.n_clusters = options.n_clusters;
    for (const auto& t : trajs) result.unit_ids.push_back(t.unit_id);
    State best;
    for (int r = 0; r < options.restarts; ++r) {
        RestartRecord record;
        record.seed = mix64(options.seed, static_cast<std::uint64_t>(r));
        State s = run_restart(trajs, d, options, record);
        if (!record.converged) {
            spdlog::warn("dtw_kmeans: restart {} hit max_iterations={} before converging", r, options.max_iterations);
        }
        if (r == 0 || s.inertia < best.inertia) {
            best = std::move(s);
            result.best_restart = r;
        }
        result.restarts.push_back(std::move(record));
    }

    // Rename clusters by their lowest unit id.
    std::vector<int> rename(static_cast<std::size_t>(options.n_clusters), -1);
    int next = 0;
    for (int l : best.labels) {
        if (rename[static_cast<std::size_t>(l)] < 0) rename[static_cast<std::size_t>(l)] = next++;
    }
    result.centroids.resize(static_cast<std::size_t>(options.n_clusters));
    for (std::size_t c = 0; c < rename.size(); ++c) {
        result.centroids[static_cast<std::size_t>(rename[c])] = std::move(best.centroids[c]);
    }
    for (int l : best.labels) result.labels.push_back(rename[static_cast<std::size_t>(l)]);
    result.inertia = best.inertia;
    return result;
}

ModeCountChoice choose_mode_count(std::span<const Trajectory> trajectories, const KMeansOptions& options,
                                  int max_clusters, double elbow_threshold) {
    const int limit = std::min<int>(max_clusters, static_cast<int>(trajectories.size()));
    if (limit < 2) throw Error(ErrorKind::Parameter, "choose_mode_count: need at least two trajectories and max >= 2");

    std::vector<Trajectory> trajs(trajectories.begin(), trajectories.end());
    std::sort(trajs.begin(), trajs.end(), [](const auto& a, const auto& b) { return a.unit_id < b.unit_id; });
    const Eigen::MatrixXd d = dtw_matrix(trajs);

    ModeCountChoice choice;
    double best = -std::numeric_limits<double>::infinity();
    for (int v = 1; v <= limit; ++v) {
        auto o = options;
        o.n_clusters = v;
        const auto r = dtw_kmeans(trajs, o);
        choice.inertia.push_back(r.inertia);
        choice.silhouette.push_back(eval::silhouette(d, r.labels));
        if (choice.silhouette.back() && *choice.silhouette.back() > best) {
            best = *choice.silhouette.back();
            choice.best_silhouette_clusters = v;
        }
    }
    choice.elbow_drop = choice.inertia[0] > 0.0 ? (choice.inertia[0] - choice.inertia[1]) / choice.inertia[0] : 0.0;
    choice.n_clusters = choice.elbow_drop < elbow_threshold ? 1 : choice.best_silhouette_clusters;
    return choice;
}

void write_labels_csv(const std::filesystem::path& file, const ClusterResult& result) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + file.string());
    out << "unit_id,failure_mode\n";
    for (std::size_t i = 0; i < result.unit_ids.size(); ++i) out << result.unit_ids[i] << ',' << result.labels[i] + 1 << '\n';
}

std::vector<std::pair<int, int>> read_labels_csv(const std::filesystem::path& file) {
    const auto table = csv::read(file);
    const auto unit_col = table.column("unit_id");
    const auto mode_col = table.column("failure_mode");
    std::vector<std::pair<int, int>> out;
    for (const auto& row : table.rows) {
        const int mode = csv::parse_int(row[mode_col]);
        if (mode < 1) throw Error(ErrorKind::Parse, file.string() + ": failure_mode must be >= 1");
        out.emplace_back(csv::parse_int(row[unit_col]), mode - 1);
    }
    return out;
}

std::vector<std::filesystem::path> write_centroid_csvs(const std::filesystem::path& dir,
                                                       std::span<const Trajectory> trajectories,
                                                       const ClusterResult& result) {
    std::vector<std::filesystem::path> files;
    for (int c = 0; c < result.n_clusters; ++c) {
        std::vector<const RowMatrix*> members;
        for (const auto& t : trajectories) {
            if (result.label_of(t.unit_id) == c) members.push_back(&t.points);
        }
        const auto& centroid = result.centroids[static_cast<std::size_t>(c)];
        Eigen::VectorXd spread = Eigen::VectorXd::Zero(centroid.rows());
        if (!members.empty()) spread = trajectory_tube(members, static_cast<int>(centroid.rows())).spread;
        const auto file = dir / ("centroid_" + std::to_string(c + 1) + ".csv");
        std::ofstream out(file);
        if (!out) throw Error(ErrorKind::Config, "cannot write " + file.string());
        out << "index";
        for (Eigen::Index d = 0; d < centroid.cols(); ++d) out << ",y_" << (d + 1);
        out << ",spread\n";
        for (Eigen::Index t = 0; t < centroid.rows(); ++t) {
            out << t;
            for (Eigen::Index d = 0; d < centroid.cols(); ++d) out << ',' << csv::format(centroid(t, d));
            out << ',' << csv::format(spread[t]) << '\n';
        }
        files.push_back(file);
    }
    return files;
}

}  // namespace fmprog::trajectory
