#include "fmprog/umap/layout.hpp"

#include "fmprog/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fmprog::umap {

namespace {

constexpr double kClip = 4.0;

struct EdgeSchedule {
    std::vector<int> head, tail;
    std::vector<double> epochs_per_sample;
    std::vector<double> next_sample;
    std::vector<double> epochs_per_negative;
    std::vector<double> next_negative;
};

// Edges with weight below max / epochs would never be sampled and are dropped.
EdgeSchedule make_schedule(const SparseGraph& a, const LayoutOptions& options) {
    EdgeSchedule s;
    double w_max = 0.0;
    for (Eigen::Index i = 0; i < a.outerSize(); ++i) {
        for (SparseGraph::InnerIterator it(a, i); it; ++it) w_max = std::max(w_max, it.value());
    }
    if (w_max <= 0.0) return s;
    const double floor = w_max / std::max(options.epochs, 1);
    for (Eigen::Index i = 0; i < a.outerSize(); ++i) {
        for (SparseGraph::InnerIterator it(a, i); it; ++it) {
            if (it.value() < floor || it.col() == it.row()) continue;
            const double eps = w_max / it.value();
            s.head.push_back(static_cast<int>(it.row()));
            s.tail.push_back(static_cast<int>(it.col()));
            s.epochs_per_sample.push_back(eps);
            s.next_sample.push_back(eps);
            const double eps_neg = options.negative_sample_rate > 0 ? eps / options.negative_sample_rate : 0.0;
            s.epochs_per_negative.push_back(eps_neg);
            s.next_negative.push_back(eps_neg);
        }
    }
    return s;
}

inline double clip(double v) { return std::clamp(v, -kClip, kClip); }

// One sampled edge: an attractive move for both ends, then the due negative samples.
inline void process_edge(EdgeSchedule& s, std::size_t e, int epoch, double rate, const LayoutOptions& o, RowMatrix& y,
                         std::size_t& attract, std::size_t& repel) {
    const Eigen::Index dim = y.cols();
    const auto n = static_cast<std::uint64_t>(y.rows());
    const double half_beta = 0.5 * o.beta;
    double* current = y.row(s.head[e]).data();
    double* other = y.row(s.tail[e]).data();

    double d2 = 0.0;
    for (Eigen::Index d = 0; d < dim; ++d) d2 += (current[d] - other[d]) * (current[d] - other[d]);
    double coeff = 0.0;
    if (d2 > 0.0) {
        const double pw = std::pow(d2, half_beta);
        coeff = -o.alpha * o.beta * pw / d2 / (o.alpha * pw + 1.0);
    }
    for (Eigen::Index d = 0; d < dim; ++d) {
        const double g = clip(coeff * (current[d] - other[d]));
        current[d] += g * rate;
        other[d] -= g * rate;
    }
    ++attract;
    s.next_sample[e] += s.epochs_per_sample[e];

    if (o.negative_sample_rate <= 0) return;
    const int n_neg = static_cast<int>((epoch - s.next_negative[e]) / s.epochs_per_negative[e]);
    for (int p = 0; p < n_neg; ++p) {
        const auto key = mix64(mix64(o.seed, e), (static_cast<std::uint64_t>(epoch) << 20) ^ static_cast<std::uint64_t>(p));
        const auto k = static_cast<Eigen::Index>(key % n);
        if (k == s.head[e]) continue;
        const double* neg = y.row(k).data();
        double nd2 = 0.0;
        for (Eigen::Index d = 0; d < dim; ++d) nd2 += (current[d] - neg[d]) * (current[d] - neg[d]);
        double rc = 0.0;
        if (nd2 > 0.0) rc = o.beta / ((0.001 + nd2) * (o.alpha * std::pow(nd2, half_beta) + 1.0));
        if (rc <= 0.0) continue;
        for (Eigen::Index d = 0; d < dim; ++d) current[d] += clip(rc * (current[d] - neg[d])) * rate;
        ++repel;
    }
    s.next_negative[e] += n_neg * s.epochs_per_negative[e];
}

void check_finite(const RowMatrix& y, int epoch) {
    if (y.allFinite()) return;
    std::ostringstream msg;
    Eigen::Index bad = 0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        if (!y.row(i).allFinite()) {
            bad = i;
            break;
        }
    }
    msg << "optimize_layout: non-finite coordinates after epoch " << epoch << " (first bad row " << bad << ")";
    throw Error(ErrorKind::Numerical, msg.str());
}

void validate(const SparseGraph& a, const RowMatrix& y, const LayoutOptions& o) {
    if (a.rows() != a.cols() || a.rows() != y.rows()) {
        throw Error(ErrorKind::Contract, "optimize_layout: graph and embedding sizes differ");
    }
    if (!(o.alpha > 0.0) || !(o.beta > 0.0)) throw Error(ErrorKind::Parameter, "optimize_layout: alpha, beta must be > 0");
    if (o.epochs < 0) throw Error(ErrorKind::Parameter, "optimize_layout: epochs must be >= 0");
}

}  // namespace

LayoutStats optimize_layout(const SparseGraph& a, RowMatrix& y, const LayoutOptions& options) {
    validate(a, y, options);
    LayoutStats stats;
    if (options.epochs == 0) return stats;
    auto s = make_schedule(a, options);
    stats.edges = s.head.size();
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const double rate = options.learning_rate * (1.0 - static_cast<double>(epoch) / options.epochs);
        for (std::size_t e = 0; e < s.head.size(); ++e) {
            if (s.next_sample[e] > epoch) continue;
            process_edge(s, e, epoch, rate, options, y, stats.attractive_updates, stats.repulsive_updates);
        }
        check_finite(y, epoch);
    }
    return stats;
}

LayoutStats optimize_layout_parallel(const SparseGraph& a, RowMatrix& y, const LayoutOptions& options) {
    validate(a, y, options);
    LayoutStats stats;
    if (options.epochs == 0) return stats;
    auto s = make_schedule(a, options);
    stats.edges = s.head.size();
    const auto n_edges = static_cast<std::ptrdiff_t>(s.head.size());
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const double rate = options.learning_rate * (1.0 - static_cast<double>(epoch) / options.epochs);
        std::size_t attract = 0, repel = 0;
#pragma omp parallel for schedule(static) reduction(+ : attract, repel)
        for (std::ptrdiff_t e = 0; e < n_edges; ++e) {
            const auto ue = static_cast<std::size_t>(e);
            if (s.next_sample[ue] > epoch) continue;
            process_edge(s, ue, epoch, rate, options, y, attract, repel);
        }
        stats.attractive_updates += attract;
        stats.repulsive_updates += repel;
        check_finite(y, epoch);
    }
    return stats;
}

}  // namespace fmprog::umap
