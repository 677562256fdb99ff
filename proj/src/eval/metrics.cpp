#include "fmprog/eval/metrics.hpp"

#include "fmprog/csv.hpp"
#include "fmprog/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace fmprog::eval {

namespace {

void require_nonempty(std::span<const Prediction> preds, const char* what) {
    if (preds.empty()) throw Error(ErrorKind::Contract, std::string(what) + ": no instances");
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

// Dense relabelling 0..k-1 in order of first appearance.
std::vector<int> dense_labels(std::span<const int> labels, int* count) {
    std::map<int, int> ids;
    std::vector<int> out;
    out.reserve(labels.size());
    for (int l : labels) out.push_back(ids.try_emplace(l, static_cast<int>(ids.size())).first->second);
    *count = static_cast<int>(ids.size());
    return out;
}

}  // namespace

double rmse(std::span<const Prediction> preds) {
    require_nonempty(preds, "rmse");
    double sse = 0.0;
    for (const auto& p : preds) sse += (p.estimate - p.truth) * (p.estimate - p.truth);
    return std::sqrt(sse / static_cast<double>(preds.size()));
}

double mae(std::span<const Prediction> preds) {
    require_nonempty(preds, "mae");
    double sae = 0.0;
    for (const auto& p : preds) sae += std::abs(p.estimate - p.truth);
    return sae / static_cast<double>(preds.size());
}

double mape(std::span<const Prediction> preds, std::size_t* included) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& p : preds) {
        if (p.truth < kMapeMinTruth) continue;
        sum += std::abs(p.estimate - p.truth) / p.truth;
        ++n;
    }
    if (included) *included = n;
    if (n == 0) throw Error(ErrorKind::Contract, "mape: every instance has truth < 1");
    return sum / static_cast<double>(n);
}

double monotonicity_ratio(std::span<const Prediction> preds, std::size_t* compared) {
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(preds[a].unit_id, preds[a].cycle) < std::tie(preds[b].unit_id, preds[b].cycle);
    });
    std::size_t pairs = 0, decreasing = 0;
    for (std::size_t r = 1; r < order.size(); ++r) {
        const auto& cur = preds[order[r]];
        const auto& prev = preds[order[r - 1]];
        if (cur.unit_id != prev.unit_id) continue;
        ++pairs;
        if (cur.estimate - prev.estimate < 0.0) ++decreasing;
    }
    if (compared) *compared = pairs;
    return pairs == 0 ? 0.0 : static_cast<double>(decreasing) / static_cast<double>(pairs);
}

std::vector<IntervalMae> interval_mae(std::span<const Prediction> preds, int interval_size) {
    if (interval_size < 1) throw Error(ErrorKind::Parameter, "interval_mae: interval size must be positive");
    std::map<int, std::pair<double, std::size_t>> buckets;
    for (const auto& p : preds) {
        const int b = static_cast<int>(std::floor(std::max(p.truth, 0.0) / interval_size));
        auto& [sum, n] = buckets[b];
        sum += std::abs(p.estimate - p.truth);
        ++n;
    }
    std::vector<IntervalMae> out;
    for (const auto& [b, acc] : buckets) {
        out.push_back({b * interval_size, (b + 1) * interval_size, acc.first / static_cast<double>(acc.second),
                       acc.second});
    }
    return out;
}

FoldStatistic fold_statistic(std::span<const double> values) {
    FoldStatistic s;
    s.folds = values.size();
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

MetricReport evaluate(std::span<const Prediction> preds, int interval_size) {
    require_nonempty(preds, "evaluate");
    MetricReport r;
    r.instances = preds.size();
    r.rmse = rmse(preds);
    r.mae = mae(preds);
    r.mape = mape(preds, &r.mape_instances);
    r.mr = monotonicity_ratio(preds, &r.mr_pairs);
    r.intervals = interval_mae(preds, interval_size);
    // Power-mean inequality; allow for rounding when every error has the same magnitude.
    if (r.rmse < r.mae * (1.0 - 1e-12)) throw Error(ErrorKind::Contract, "evaluate: rmse < mae");
    return r;
}

void attach_fold_statistics(MetricReport& report, std::span<const MetricReport> per_fold) {
    std::vector<double> rm, ma, mp, m;
    for (const auto& f : per_fold) {
        rm.push_back(f.rmse);
        ma.push_back(f.mae);
        mp.push_back(f.mape);
        m.push_back(f.mr);
    }
    report.folds["rmse"] = fold_statistic(rm);
    report.folds["mae"] = fold_statistic(ma);
    report.folds["mape"] = fold_statistic(mp);
    report.folds["mr"] = fold_statistic(m);
}

nlohmann::json to_json(const MetricReport& report) {
    nlohmann::json j;
    j["rmse"] = report.rmse;
    j["mae"] = report.mae;
    j["mape"] = report.mape;
    j["mr"] = report.mr;
    j["instances"] = report.instances;
    j["mape_instances"] = report.mape_instances;
    j["mape_rule"] = "instances with true RUL < 1 excluded";
    j["mr_pairs"] = report.mr_pairs;
    j["mr_rule"] = "first instance of each unit excluded";
    auto& iv = j["intervals"] = nlohmann::json::array();
    for (const auto& b : report.intervals) {
        iv.push_back({{"lower", b.lower}, {"upper", b.upper}, {"mae", b.mae}, {"count", b.count}});
    }
    if (!report.folds.empty()) {
        auto& f = j["folds"];
        for (const auto& [name, s] : report.folds) f[name] = {{"mean", s.mean}, {"std", s.std}, {"folds", s.folds}};
    }
    return j;
}

void write_report_json(const std::filesystem::path& file, const MetricReport& report) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + file.string());
    out << to_json(report).dump(2) << '\n';
}

void write_interval_csv(const std::filesystem::path& file, std::span<const IntervalMae> intervals) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + file.string());
    out << "lower,upper,count,mae\n";
    for (const auto& b : intervals) out << b.lower << ',' << b.upper << ',' << b.count << ',' << csv::format(b.mae) << '\n';
}

std::optional<double> silhouette(const Eigen::MatrixXd& distances, std::span<const int> labels) {
    const auto n = labels.size();
    if (distances.rows() != static_cast<Eigen::Index>(n) || distances.cols() != static_cast<Eigen::Index>(n)) {
        throw Error(ErrorKind::Contract, "silhouette: distance matrix and labels differ in size");
    }
    int k = 0;
    const auto dense = dense_labels(labels, &k);
    if (k < 2) return std::nullopt;

    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int l : dense) ++sizes[static_cast<std::size_t>(l)];
    double total = 0.0;
    std::vector<double> sums(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(dense[i]);
        if (sizes[own] == 1) continue;  // contributes 0
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sums[static_cast<std::size_t>(dense[j])] += distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sums.size(); ++c) {
            if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw Error(ErrorKind::Contract, "adjusted_rand_index: labelings differ in length");
    int ka = 0, kb = 0;
    const auto da = dense_labels(a, &ka);
    const auto db = dense_labels(b, &kb);
    Eigen::MatrixXd table = Eigen::MatrixXd::Zero(ka, kb);
    for (std::size_t i = 0; i < a.size(); ++i) table(da[i], db[i]) += 1.0;

    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        for (Eigen::Index j = 0; j < table.cols(); ++j) index += choose2(table(i, j));
    }
    for (Eigen::Index i = 0; i < table.rows(); ++i) sum_a += choose2(table.row(i).sum());
    for (Eigen::Index j = 0; j < table.cols(); ++j) sum_b += choose2(table.col(j).sum());
    const double total = choose2(static_cast<double>(a.size()));
    if (total == 0.0) return 1.0;
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;  // both labelings trivial in the same way
    return (index - expected) / (max_index - expected);
}

ClusteringDiagnostics clustering_diagnostics(std::span<const int> labels, const Eigen::MatrixXd& distances,
                                             std::span<const int> reference) {
    ClusteringDiagnostics d;
    d.silhouette = silhouette(distances, labels);
    if (!reference.empty()) d.adjusted_rand = adjusted_rand_index(labels, reference);
    return d;
}

}  // namespace fmprog::eval
