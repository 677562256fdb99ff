#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fmprog::eval {

/// One scored instance.
struct Prediction {
    int unit_id = 0;
    int cycle = 0;
    double truth = 0.0;
    double estimate = 0.0;
};

double rmse(std::span<const Prediction> preds);
double mae(std::span<const Prediction> preds);

/// Instances with truth below this are left out of MAPE (the true RUL reaches 0 at failure).
inline constexpr double kMapeMinTruth = 1.0;

/// Mean of |estimate - truth| / truth as a fraction, over instances with truth >= kMapeMinTruth.
double mape(std::span<const Prediction> preds, std::size_t* included = nullptr);

/// Fraction of backward differences within each unit (cycle order) that are negative.
/// The first instance of a unit has no predecessor and counts for nothing.
double monotonicity_ratio(std::span<const Prediction> preds, std::size_t* compared = nullptr);

struct IntervalMae {
    int lower = 0;
    int upper = 0;  // exclusive
    double mae = 0.0;
    std::size_t count = 0;
};

/// MAE per true-RUL bucket [0, size), [size, 2 size), ...; empty buckets are absent.
std::vector<IntervalMae> interval_mae(std::span<const Prediction> preds, int interval_size = 50);

struct FoldStatistic {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1); 0 for a single fold
    std::size_t folds = 0;
};
FoldStatistic fold_statistic(std::span<const double> values);

struct MetricReport {
    double rmse = 0.0;
    double mae = 0.0;
    double mape = 0.0;
    double mr = 0.0;
    std::size_t instances = 0;
    std::size_t mape_instances = 0;
    std::size_t mr_pairs = 0;
    std::vector<IntervalMae> intervals;
    std::map<std::string, FoldStatistic> folds;  // metric name -> across-fold statistic
};

/// Computes all metrics. Throws Contract if RMSE < MAE ever comes out (it cannot for real data).
MetricReport evaluate(std::span<const Prediction> preds, int interval_size = 50);

/// Adds mean/std over per-fold reports for rmse, mae, mape and mr.
void attach_fold_statistics(MetricReport& report, std::span<const MetricReport> per_fold);

nlohmann::json to_json(const MetricReport& report);
void write_report_json(const std::filesystem::path& file, const MetricReport& report);
void write_interval_csv(const std::filesystem::path& file, std::span<const IntervalMae> intervals);

/// Silhouette over a precomputed distance matrix; absent when fewer than two clusters are used.
/// Points alone in their cluster score 0.
std::optional<double> silhouette(const Eigen::MatrixXd& distances, std::span<const int> labels);

/// Adjusted Rand index between two labelings of the same items.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

struct ClusteringDiagnostics {
    std::optional<double> silhouette;
    std::optional<double> adjusted_rand;  // present when a reference labeling was given
};
ClusteringDiagnostics clustering_diagnostics(std::span<const int> labels, const Eigen::MatrixXd& distances,
                                             std::span<const int> reference = {});

}  // namespace fmprog::eval
