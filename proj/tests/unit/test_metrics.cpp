#include "fmprog/csv.hpp"
#include "fmprog/error.hpp"
#include "fmprog/eval/metrics.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

using namespace fmprog;
using namespace fmprog::eval;

namespace {

std::vector<Prediction> unit_sequence(int unit, const std::vector<double>& estimates, double first_truth = 10.0) {
    std::vector<Prediction> out;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        out.push_back({unit, static_cast<int>(i + 1), first_truth - static_cast<double>(i), estimates[i]});
    }
    return out;
}

// Random fleet of predicted sequences; truth counts down to 0.
std::vector<Prediction> random_predictions(std::mt19937_64& rng, int units) {
    std::uniform_int_distribution<int> len(2, 260);
    std::normal_distribution<double> err(0.0, 20.0);
    std::vector<Prediction> out;
    for (int u = 1; u <= units; ++u) {
        const int t = len(rng);
        for (int c = 1; c <= t; ++c) {
            const double truth = t - c;
            out.push_back({u, c, truth, std::max(0.0, truth + err(rng))});
        }
    }
    return out;
}

}  // namespace

TEST(Metrics, RmseExamples) {
    const std::vector<Prediction> one = {{1, 1, 0.0, 3.0}};
    EXPECT_EQ(rmse(one), 3.0);
    const std::vector<Prediction> two = {{1, 1, 3.0, 0.0}, {1, 2, 0.0, 4.0}};
    EXPECT_NEAR(rmse(two), 3.5355339059327378, 1e-15);
    const auto perfect = unit_sequence(1, {10, 9, 8});
    EXPECT_EQ(rmse(perfect), 0.0);
    EXPECT_EQ(mae(perfect), 0.0);
    EXPECT_EQ(mape(perfect), 0.0);
    EXPECT_THROW(rmse({}), Error);
}

TEST(Metrics, MaeAndMapeExamples) {
    const std::vector<Prediction> a = {{1, 1, 100.0, 90.0}};
    EXPECT_EQ(mae(a), 10.0);
    EXPECT_NEAR(mape(a), 0.1, 1e-15);
    const std::vector<Prediction> b = {{1, 1, 100.0, 90.0}, {1, 2, 0.0, 5.0}};
    std::size_t included = 0;
    EXPECT_EQ(mae(b), 7.5);
    EXPECT_NEAR(mape(b, &included), 0.1, 1e-15);
    EXPECT_EQ(included, 1u);
    const std::vector<Prediction> c = {{1, 1, 0.5, 5.0}};
    EXPECT_THROW(mape(c), Error);
}

TEST(Metrics, MonotonicityExamples) {
    EXPECT_EQ(monotonicity_ratio(unit_sequence(1, {5, 4, 3})), 1.0);
    EXPECT_EQ(monotonicity_ratio(unit_sequence(1, {5, 5, 4})), 0.5);
    EXPECT_EQ(monotonicity_ratio(unit_sequence(1, {1, 2, 3, 4})), 0.0);
    auto two = unit_sequence(1, {5, 5, 4});
    const auto single = unit_sequence(2, {7});
    two.insert(two.end(), single.begin(), single.end());
    std::size_t pairs = 0;
    EXPECT_EQ(monotonicity_ratio(two, &pairs), 0.5);
    EXPECT_EQ(pairs, 2u);
}

TEST(Metrics, IntervalExamples) {
    const std::vector<Prediction> low = {{1, 1, 10.0, 12.0}, {1, 2, 49.0, 40.0}};
    const auto single = interval_mae(low);
    ASSERT_EQ(single.size(), 1u);
    EXPECT_EQ(single[0].lower, 0);
    EXPECT_EQ(single[0].upper, 50);
    EXPECT_EQ(single[0].mae, 5.5);
    const std::vector<Prediction> gap = {{1, 1, 10.0, 12.0}, {1, 2, 120.0, 100.0}, {1, 3, 149.0, 150.0}};
    const auto buckets = interval_mae(gap);
    ASSERT_EQ(buckets.size(), 2u);  // [50,100) is empty and absent
    EXPECT_EQ(buckets[0].mae, 2.0);
    EXPECT_EQ(buckets[1].lower, 100);
    EXPECT_EQ(buckets[1].mae, 10.5);
    EXPECT_EQ(buckets[1].count, 2u);
}

TEST(Metrics, FoldStatisticUsesSampleStd) {
    const std::vector<double> v = {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
    const auto s = fold_statistic(v);
    EXPECT_EQ(s.mean, 5.0);
    EXPECT_NEAR(s.std, std::sqrt(32.0 / 7.0), 1e-15);
    EXPECT_EQ(fold_statistic(std::vector<double>{3.0}).std, 0.0);
}

TEST(MetricProperties, IdentitiesHoldOnRandomFleets) {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 40; ++trial) {
        auto preds = random_predictions(rng, 1 + trial % 9);
        const auto r = evaluate(preds);
        EXPECT_GE(r.rmse, r.mae);
        EXPECT_GE(r.mr, 0.0);
        EXPECT_LE(r.mr, 1.0);
        double weighted = 0.0;
        std::size_t count = 0;
        for (const auto& b : r.intervals) {
            weighted += b.mae * static_cast<double>(b.count);
            count += b.count;
        }
        EXPECT_EQ(count, preds.size());
        EXPECT_NEAR(weighted / static_cast<double>(count), r.mae, 1e-9);

        // Truth used as the estimate: strictly decreasing labels.
        auto labels = preds;
        for (auto& p : labels) p.estimate = p.truth;
        EXPECT_EQ(monotonicity_ratio(labels), 1.0);

        // Unit reordering leaves every metric unchanged.
        std::vector<std::vector<Prediction>> by_unit;
        for (const auto& p : preds) {
            if (by_unit.empty() || by_unit.back().front().unit_id != p.unit_id) by_unit.emplace_back();
            by_unit.back().push_back(p);
        }
        std::shuffle(by_unit.begin(), by_unit.end(), rng);
        std::vector<Prediction> shuffled;
        for (const auto& u : by_unit) shuffled.insert(shuffled.end(), u.begin(), u.end());
        const auto s = evaluate(shuffled);
        EXPECT_NEAR(s.rmse, r.rmse, 1e-9 * r.rmse);
        EXPECT_NEAR(s.mae, r.mae, 1e-9 * r.mae);
        EXPECT_NEAR(s.mape, r.mape, 1e-9 * r.mape);
        EXPECT_EQ(s.mr, r.mr);
    }
}

TEST(Metrics, ReportJsonAndIntervalCsv) {
    std::mt19937_64 rng(4);
    const auto preds = random_predictions(rng, 3);
    auto report = evaluate(preds);
    std::vector<MetricReport> folds = {report, report};
    folds[1].rmse += 2.0;
    attach_fold_statistics(report, folds);
    EXPECT_EQ(report.folds.at("rmse").mean, report.rmse + 1.0);
    const auto j = to_json(report);
    EXPECT_EQ(j.at("instances"), preds.size());
    EXPECT_TRUE(j.contains("mape_rule"));
    EXPECT_TRUE(j.contains("mr_rule"));
    const auto dir = fixtures::scratch_dir("metrics_out");
    write_report_json(dir / "report.json", report);
    std::ifstream in(dir / "report.json");
    EXPECT_EQ(nlohmann::json::parse(in).at("rmse"), report.rmse);
    write_interval_csv(dir / "intervals.csv", report.intervals);
    const auto t = csv::read(dir / "intervals.csv");
    EXPECT_EQ(t.rows.size(), report.intervals.size());
    EXPECT_EQ(csv::parse_double(t.rows[0][t.column("mae")]), report.intervals[0].mae);
}

TEST(Silhouette, FourPointToyMatchesHandComputation) {
    // Points 0, 1 | 4, 6 on a line.
    const std::vector<double> x = {0.0, 1.0, 4.0, 6.0};
    Eigen::MatrixXd d(4, 4);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) d(i, j) = std::abs(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]);
    }
    const std::vector<int> labels = {0, 0, 1, 1};
    // s0 = 1 - 1/5, s1 = 1 - 1/4, s2 = 1 - 2/3.5, s3 = 1 - 2/5.5
    const double expected = (0.8 + 0.75 + (1.0 - 2.0 / 3.5) + (1.0 - 2.0 / 5.5)) / 4.0;
    EXPECT_NEAR(*silhouette(d, labels), expected, 1e-15);
    EXPECT_FALSE(silhouette(d, std::vector<int>{0, 0, 0, 0}).has_value());
    // A singleton contributes 0.
    const std::vector<int> lone = {0, 0, 0, 1};
    const double s0 = (6.0 - 2.5) / 6.0, s1 = (5.0 - 2.0) / 5.0, s2 = (2.0 - 3.5) / 3.5;  // (b - a) / max(a, b)
    EXPECT_NEAR(*silhouette(d, lone), (s0 + s1 + s2 + 0.0) / 4.0, 1e-15);
}

TEST(AdjustedRand, IdentityRenamingAndIndependence) {
    const std::vector<int> a = {0, 0, 1, 1, 2, 2};
    EXPECT_DOUBLE_EQ(adjusted_rand_index(a, a), 1.0);
    EXPECT_DOUBLE_EQ(adjusted_rand_index(a, std::vector<int>{5, 5, 3, 3, 9, 9}), 1.0);
    const std::vector<int> b = {0, 0, 1, 1}, c = {0, 1, 0, 1};
    // sum C(n_ij,2)=0, sum C(a_i,2)=2, sum C(b_j,2)=2, C(4,2)=6: (0 - 4/6) / (2 - 4/6) = -0.5
    EXPECT_NEAR(adjusted_rand_index(b, c), -0.5, 1e-15);
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> lab(0, 3);
    std::vector<int> r1(20000), r2(20000);
    for (auto& v : r1) v = lab(rng);
    for (auto& v : r2) v = lab(rng);
    EXPECT_NEAR(adjusted_rand_index(r1, r2), 0.0, 0.01);
    const auto diag = clustering_diagnostics(b, Eigen::MatrixXd::Ones(4, 4) - Eigen::MatrixXd::Identity(4, 4), b);
    EXPECT_TRUE(diag.silhouette.has_value());
    EXPECT_DOUBLE_EQ(*diag.adjusted_rand, 1.0);
}
