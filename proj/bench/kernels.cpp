// Serial reference vs OpenMP kernels. Run with --benchmark_filter=<kernel> to narrow.

#include "fmprog/trajectory/trajectory.hpp"
#include "fmprog/umap/graph.hpp"
#include "fmprog/umap/knn.hpp"
#include "fmprog/umap/layout.hpp"
#include "fmprog/umap/spectral.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace fmprog;

namespace {

RowMatrix cloud(Eigen::Index n, Eigen::Index dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RowMatrix x(n, dim);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    return x;
}

std::vector<trajectory::Trajectory> paths(int count, int length) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> len(length / 2, length);
    std::vector<trajectory::Trajectory> out;
    for (int u = 0; u < count; ++u) out.push_back({u + 1, cloud(len(rng), 2, rng())});
    return out;
}

void BM_KnnSerial(benchmark::State& s) {
    const auto x = cloud(s.range(0), 14, 1);
    for (auto _ : s) benchmark::DoNotOptimize(umap::knn_exact_serial(x, 80));
}
void BM_KnnParallel(benchmark::State& s) {
    const auto x = cloud(s.range(0), 14, 1);
    for (auto _ : s) benchmark::DoNotOptimize(umap::knn_exact(x, 80));
}

void BM_SmoothKnnSerial(benchmark::State& s) {
    const auto nn = umap::knn_exact(cloud(s.range(0), 14, 2), 80);
    for (auto _ : s) benchmark::DoNotOptimize(umap::smooth_knn_serial(nn));
}
void BM_SmoothKnnParallel(benchmark::State& s) {
    const auto nn = umap::knn_exact(cloud(s.range(0), 14, 2), 80);
    for (auto _ : s) benchmark::DoNotOptimize(umap::smooth_knn(nn));
}

void BM_DtwMatrixSerial(benchmark::State& s) {
    const auto t = paths(static_cast<int>(s.range(0)), 250);
    for (auto _ : s) benchmark::DoNotOptimize(trajectory::dtw_matrix_serial(t));
}
void BM_DtwMatrixParallel(benchmark::State& s) {
    const auto t = paths(static_cast<int>(s.range(0)), 250);
    for (auto _ : s) benchmark::DoNotOptimize(trajectory::dtw_matrix(t));
}

struct LayoutFixture {
    umap::SparseGraph a;
    RowMatrix y0;
    umap::LayoutOptions options;

    explicit LayoutFixture(Eigen::Index n) {
        const auto nn = umap::knn_exact(cloud(n, 14, 4), 30);
        const auto sk = umap::smooth_knn(nn);
        a = umap::symmetrize(umap::fuzzy_weights(nn, sk.rho, sk.sigma));
        y0 = umap::spectral_init(a, 2, 4);
        options.epochs = 50;
    }
};

void BM_LayoutSerial(benchmark::State& s) {
    const LayoutFixture f(s.range(0));
    for (auto _ : s) {
        auto y = f.y0;
        benchmark::DoNotOptimize(umap::optimize_layout(f.a, y, f.options));
    }
}
void BM_LayoutParallel(benchmark::State& s) {
    const LayoutFixture f(s.range(0));
    for (auto _ : s) {
        auto y = f.y0;
        benchmark::DoNotOptimize(umap::optimize_layout_parallel(f.a, y, f.options));
    }
}

}  // namespace

BENCHMARK(BM_KnnSerial)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_KnnParallel)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SmoothKnnSerial)->Arg(8000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SmoothKnnParallel)->Arg(8000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DtwMatrixSerial)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DtwMatrixParallel)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LayoutSerial)->Arg(5000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LayoutParallel)->Arg(5000)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
