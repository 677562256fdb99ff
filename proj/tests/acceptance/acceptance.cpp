// Acceptance criteria that need no external data. One PASS/FAIL line per criterion; exit 1 if any fails.

#include "fmprog/eval/metrics.hpp"
#include "fmprog/joint/losses.hpp"
#include "fmprog/joint/model.hpp"
#include "fmprog/joint/train.hpp"
#include "fmprog/trajectory/trajectory.hpp"
#include "fmprog/umap/graph.hpp"
#include "fmprog/umap/knn.hpp"

#include "fixtures.hpp"
#include "report.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace fmprog;
using namespace fmprog::acceptance;

namespace {

// ---- C1 -----------------------------------------------------------------------------------------------------

double point_cost(const RowMatrix& p, const RowMatrix& q, Eigen::Index i, Eigen::Index j) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < p.cols(); ++c) s += (p(i, c) - q(j, c)) * (p(i, c) - q(j, c));
    return std::sqrt(s);
}

// Minimum over every monotone alignment path from (0,0) to (n-1,m-1), cost summed along the path.
void enumerate_paths(const RowMatrix& p, const RowMatrix& q, Eigen::Index i, Eigen::Index j, double acc, double& best) {
    acc += point_cost(p, q, i, j);
    if (i == p.rows() - 1 && j == q.rows() - 1) {
        best = std::min(best, acc);
        return;
    }
    if (i + 1 < p.rows()) enumerate_paths(p, q, i + 1, j, acc, best);
    if (j + 1 < q.rows()) enumerate_paths(p, q, i, j + 1, acc, best);
    if (i + 1 < p.rows() && j + 1 < q.rows()) enumerate_paths(p, q, i + 1, j + 1, acc, best);
}

Verdict dtw_oracle() {
    Stopwatch clock;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> len(1, 8), dim(1, 3);
    int mismatches = 0;
    double worst = 0.0;
    for (int pair = 0; pair < 200; ++pair) {
        const int d = dim(rng);
        const auto p = fixtures::random_matrix(len(rng), d, rng, -2.0, 2.0);
        const auto q = fixtures::random_matrix(len(rng), d, rng, -2.0, 2.0);
        double best = std::numeric_limits<double>::infinity();
        enumerate_paths(p, q, 0, 0, 0.0, best);
        const double dp = trajectory::dtw(p, q);
        if (dp != best) {
            ++mismatches;
            worst = std::max(worst, std::abs(dp - best));
        }
    }
    const double t = clock.seconds();
    return {"C1", "dtw-exhaustive-oracle", mismatches == 0 && t < 10.0,
            strf("200 pairs (len<=8), %d inexact (max diff %.3g), runtime %.2fs < 10s", mismatches, worst, t), t};
}

// ---- C2 -----------------------------------------------------------------------------------------------------

Verdict sigma_search() {
    Stopwatch clock;
    std::mt19937_64 rng(77);
    const auto points = fixtures::random_matrix(1000, 14, rng);
    const auto neighbors = umap::knn_exact(points, 80);
    const auto smooth = umap::smooth_knn(neighbors);
    const double target = std::log2(80.0);
    int within = 0;
    double worst = 0.0;
    for (double s : smooth.weight_sum) {
        const double err = std::abs(s - target);
        worst = std::max(worst, err);
        within += err <= 1e-5 ? 1 : 0;
    }
    for (auto i : smooth.floored) spdlog::warn("C2: point {} took the sigma floor", i);
    const double frac = within / 1000.0;
    const double t = clock.seconds();
    return {"C2", "sigma-binary-search", frac >= 0.999 && t < 30.0,
            strf("%.1f%% of 1000 points within 1e-5 of log2(80) (max err %.2e, %zu floored), runtime %.2fs < 30s",
                100.0 * frac, worst, smooth.floored.size(), t),
            t};
}

// ---- C3 -----------------------------------------------------------------------------------------------------

Verdict gradient_check() {
    Stopwatch clock;
    joint::Architecture a;
    a.window = 5;
    a.features = 3;
    a.modes = 2;
    a.hidden1 = 8;
    a.hidden2 = 8;
    std::mt19937_64 rng(31);
    std::vector<RowMatrix> windows;
    for (int i = 0; i < 6; ++i) windows.push_back(fixtures::random_matrix(a.window, a.features, rng));
    joint::Batch batch;
    for (int i = 0; i < 6; ++i) {
        batch.inputs.push_back(&windows[static_cast<std::size_t>(i)]);
        batch.targets.push_back(20.0 - 3.0 * i);
        batch.modes.push_back(i % 2);
        batch.unit_ids.push_back(i < 5 ? 1 : 2);
        batch.end_cycles.push_back(10 + i);
    }
    const joint::JointModel model(a, 30.0, 15.0, 31);
    bool pass = true;
    std::string detail;
    for (double eta : {0.0, 0.5}) {
        joint::LossConfig c;
        c.eta = eta;
        c.a = 0.05;  // narrow dead band: the penalty is active on most pairs
        const auto r = joint::grad_check(model, batch, c);
        const bool interior = r.kink_margin > 1e-3;
        pass = pass && interior && r.max_relative_error < 1e-4;
        detail += strf("eta=%.1f: max rel err %.2e over %zu params (kink margin %.2g); ", eta, r.max_relative_error,
                      r.parameters, r.kink_margin);
    }
    detail += "threshold 1e-4";
    return {"C3", "joint-model-gradient-check", pass, detail, clock.seconds()};
}

// ---- C4 -----------------------------------------------------------------------------------------------------

Verdict loss_formulas() {
    Stopwatch clock;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> rul(0.0, 400.0), err(-80.0, 80.0), logit(-6.0, 6.0);
    double worst_hs = 0.0, worst_ce = 0.0;
    int asymmetry_violations = 0, checked = 0;
    for (int i = 0; i < 20000; ++i) {
        const double y = rul(rng), yhat = y + err(rng);
        const double e = yhat - y;
        const double ref = e >= 0.0 ? std::exp(e / 10.0) - 1.0 : std::exp(-e / 13.0) - 1.0;
        worst_hs = std::max(worst_hs, std::abs(joint::loss_hs(yhat, y) - ref) / std::max(1.0, std::abs(ref)));

        const int v = 2 + i % 4;
        std::vector<double> p(static_cast<std::size_t>(v)), q(static_cast<std::size_t>(v), 0.0);
        double z = 0.0;
        for (auto& x : p) z += (x = std::exp(logit(rng)));
        for (auto& x : p) x /= z;
        const auto label = static_cast<std::size_t>(i % v);
        q[label] = 1.0;
        const double ce_ref = -std::log(p[label]);
        worst_ce = std::max(worst_ce, std::abs(joint::loss_ce(p, q) - ce_ref) / std::max(1.0, ce_ref));

        ++checked;
        if (!(joint::loss_hs(y + 13.0, y) > joint::loss_hs(y - 13.0, y))) ++asymmetry_violations;
    }
    const bool pass = worst_hs <= 1e-12 && worst_ce <= 1e-12 && asymmetry_violations == 0;
    return {"C4", "loss-formulas", pass,
            strf("max rel diff hs %.2e, ce %.2e (<= 1e-12); hs(y+13,y) > hs(y-13,y) fails %d of %d", worst_hs, worst_ce,
                asymmetry_violations, checked),
            clock.seconds()};
}

// ---- C10 ----------------------------------------------------------------------------------------------------

Verdict metric_identities() {
    Stopwatch clock;
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> units(1, 12), life(2, 300);
    std::normal_distribution<double> noise(0.0, 25.0);
    int reports = 0, rmse_violations = 0, mr_violations = 0;
    double worst_gap = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<eval::Prediction> preds, labels;
        const int n = units(rng);
        for (int u = 1; u <= n; ++u) {
            const int t = life(rng);
            for (int c = 1; c <= t; ++c) {
                const double truth = t - c;
                preds.push_back({u, c, truth, std::max(0.0, truth + noise(rng))});
                labels.push_back({u, c, truth, truth});
            }
        }
        for (const auto* set : {&preds, &labels}) {
            const auto r = eval::evaluate(*set);
            ++reports;
            if (r.rmse < r.mae) ++rmse_violations;
            double weighted = 0.0;
            std::size_t count = 0;
            for (const auto& b : r.intervals) {
                weighted += b.mae * static_cast<double>(b.count);
                count += b.count;
            }
            worst_gap = std::max(worst_gap, std::abs(weighted / static_cast<double>(count) - r.mae));
        }
        if (eval::monotonicity_ratio(labels) != 1.0) ++mr_violations;
    }
    const bool pass = rmse_violations == 0 && mr_violations == 0 && worst_gap <= 1e-9;
    return {"C10", "metric-identities", pass,
            strf("%d reports: RMSE<MAE %d times, MR(labels)!=1 %d times, interval->global MAE gap %.2e (<= 1e-9)", reports,
                rmse_violations, mr_violations, worst_gap),
            clock.seconds()};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    std::vector<Verdict> verdicts;
    for (auto* criterion : {dtw_oracle, sigma_search, gradient_check, loss_formulas, metric_identities}) {
        verdicts.push_back(criterion());
        print(verdicts.back());
    }
    return summarize(verdicts);
}
