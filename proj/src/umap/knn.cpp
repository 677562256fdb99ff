#include "fmprog/umap/knn.hpp"

#include "fmprog/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

namespace fmprog::umap {

namespace {

using Candidate = std::pair<double, int>;  // (distance, index); lexicographic order is the tie rule

void check_k(const RowMatrix& points, int k) {
    if (k < 1 || static_cast<Eigen::Index>(k) >= points.rows()) {
        throw Error(ErrorKind::Parameter, "knn: need 1 <= k < N (k=" + std::to_string(k) +
                                              ", N=" + std::to_string(points.rows()) + ")");
    }
}

NeighborList make_list(std::size_t n, int k) {
    NeighborList out;
    out.n_points = n;
    out.k = k;
    out.index.resize(n * static_cast<std::size_t>(k));
    out.distance.resize(n * static_cast<std::size_t>(k));
    return out;
}

void store(NeighborList& out, std::size_t i, std::vector<Candidate>& cand) {
    const auto k = static_cast<std::size_t>(out.k);
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t r = 0; r < k; ++r) {
        out.distance[i * k + r] = cand[r].first;
        out.index[i * k + r] = cand[r].second;
    }
}

}  // namespace

double euclidean(const double* a, const double* b, Eigen::Index dim) {
    double acc = 0.0;
    for (Eigen::Index d = 0; d < dim; ++d) {
        const double diff = a[d] - b[d];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

NeighborList knn_exact_serial(const RowMatrix& points, int k) {
    check_k(points, k);
    const auto n = static_cast<std::size_t>(points.rows());
    const auto dim = points.cols();
    auto out = make_list(n, k);
    std::vector<Candidate> cand;
    cand.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            cand.emplace_back(euclidean(points.row(i).data(), points.row(j).data(), dim), static_cast<int>(j));
        }
        store(out, i, cand);
    }
    return out;
}

NeighborList knn_exact(const RowMatrix& points, int k) {
    check_k(points, k);
    const auto n = static_cast<Eigen::Index>(points.rows());
    const auto dim = points.cols();
    auto out = make_list(static_cast<std::size_t>(n), k);

    const Eigen::VectorXd norms = points.rowwise().squaredNorm();
    // Rounding of n_i + n_j - 2 x_i.x_j is bounded well below this slack.
    const double slack = 1e-9 * (1.0 + 2.0 * norms.maxCoeff());
    constexpr Eigen::Index kBlock = 64;
    const Eigen::Index n_blocks = (n + kBlock - 1) / kBlock;

#pragma omp parallel
    {
        Eigen::MatrixXd gram;
        std::vector<Candidate> approx;
        std::vector<Candidate> exact;
        approx.reserve(static_cast<std::size_t>(n));
#pragma omp for schedule(dynamic, 1)
        for (Eigen::Index b = 0; b < n_blocks; ++b) {
            const Eigen::Index begin = b * kBlock;
            const Eigen::Index rows = std::min(kBlock, n - begin);
            gram.noalias() = points.middleRows(begin, rows) * points.transpose();
            for (Eigen::Index r = 0; r < rows; ++r) {
                const Eigen::Index i = begin + r;
                approx.clear();
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (j == i) continue;
                    approx.emplace_back(norms[i] + norms[j] - 2.0 * gram(r, j), static_cast<int>(j));
                }
                std::nth_element(approx.begin(), approx.begin() + (k - 1), approx.end());
                const double threshold = approx[static_cast<std::size_t>(k - 1)].first + 2.0 * slack;
                exact.clear();
                for (const auto& [d2, j] : approx) {
                    if (d2 <= threshold) {
                        exact.emplace_back(euclidean(points.row(i).data(), points.row(j).data(), dim), j);
                    }
                }
                store(out, static_cast<std::size_t>(i), exact);
            }
        }
    }
    return out;
}

NeighborList knn_approx(const RowMatrix& points, int k, std::uint64_t seed, int max_iterations) {
    check_k(points, k);
    const auto n = static_cast<std::size_t>(points.rows());
    const auto dim = points.cols();
    const auto kk = static_cast<std::size_t>(k);

    struct Entry {
        double d;
        int j;
        bool fresh;
    };
    std::vector<std::vector<Entry>> heap(n);
    auto dist = [&](std::size_t a, std::size_t b) {
        return euclidean(points.row(static_cast<Eigen::Index>(a)).data(),
                         points.row(static_cast<Eigen::Index>(b)).data(), dim);
    };
    auto try_insert = [&](std::size_t i, int j, double d) {
        auto& h = heap[i];
        if (static_cast<std::size_t>(j) == i) return false;
        if (h.size() == kk && std::make_pair(d, j) >= std::make_pair(h.back().d, h.back().j)) return false;
        for (const auto& e : h) {
            if (e.j == j) return false;
        }
        auto pos = std::lower_bound(h.begin(), h.end(), std::make_pair(d, j),
                                    [](const Entry& e, const std::pair<double, int>& v) {
                                        return std::make_pair(e.d, e.j) < v;
                                    });
        h.insert(pos, Entry{d, j, true});
        if (h.size() > kk) h.pop_back();
        return true;
    };

    for (std::size_t i = 0; i < n; ++i) {
        std::mt19937_64 rng(mix64(seed, i));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        while (heap[i].size() < kk) {
            const auto j = pick(rng);
            try_insert(i, static_cast<int>(j), dist(i, j));
        }
    }

    for (int iter = 0; iter < max_iterations; ++iter) {
        std::vector<std::vector<int>> fresh(n), old(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& e : heap[i]) {
                if (e.fresh) {
                    fresh[i].push_back(e.j);
                    fresh[static_cast<std::size_t>(e.j)].push_back(static_cast<int>(i));
                    e.fresh = false;
                } else {
                    old[i].push_back(e.j);
                    old[static_cast<std::size_t>(e.j)].push_back(static_cast<int>(i));
                }
            }
        }
        std::size_t updates = 0;
        for (std::size_t i = 0; i < n; ++i) {
            auto& f = fresh[i];
            std::sort(f.begin(), f.end());
            f.erase(std::unique(f.begin(), f.end()), f.end());
            for (std::size_t a = 0; a < f.size(); ++a) {
                for (std::size_t b = a + 1; b < f.size(); ++b) {
                    const double d = dist(static_cast<std::size_t>(f[a]), static_cast<std::size_t>(f[b]));
                    updates += try_insert(static_cast<std::size_t>(f[a]), f[b], d);
                    updates += try_insert(static_cast<std::size_t>(f[b]), f[a], d);
                }
                for (int o : old[i]) {
                    if (o == f[a]) continue;
                    const double d = dist(static_cast<std::size_t>(f[a]), static_cast<std::size_t>(o));
                    updates += try_insert(static_cast<std::size_t>(f[a]), o, d);
                    updates += try_insert(static_cast<std::size_t>(o), f[a], d);
                }
            }
        }
        if (static_cast<double>(updates) <= 0.001 * static_cast<double>(n * kk)) break;
    }

    auto out = make_list(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < kk; ++r) {
            out.distance[i * kk + r] = heap[i][r].d;
            out.index[i * kk + r] = heap[i][r].j;
        }
    }
    return out;
}

NeighborList knn_graph(const RowMatrix& points, int k, KnnBackend backend, std::uint64_t seed) {
    return backend == KnnBackend::Exact ? knn_exact(points, k) : knn_approx(points, k, seed);
}

}  // namespace fmprog::umap
