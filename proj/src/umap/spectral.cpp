#include "fmprog/umap/spectral.hpp"

#include "fmprog/error.hpp"

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <random>

namespace fmprog::umap {

namespace {

constexpr Eigen::Index kDenseLimit = 1500;
constexpr Eigen::Index kMaxLanczosSteps = 500;
constexpr double kResidualTol = 1e-5;

// Flip each column so that its largest-magnitude entry is positive.
void fix_signs(Eigen::MatrixXd& vecs) {
    for (Eigen::Index c = 0; c < vecs.cols(); ++c) {
        Eigen::Index arg = 0;
        vecs.col(c).cwiseAbs().maxCoeff(&arg);
        if (vecs(arg, c) < 0) vecs.col(c) *= -1.0;
    }
}

std::optional<Eigen::MatrixXd> dense_eigenvectors(const SparseGraph& sub, const Eigen::VectorXd& inv_sqrt_deg,
                                                  int dim) {
    const Eigen::Index n = sub.rows();
    Eigen::MatrixXd lap = -(inv_sqrt_deg.asDiagonal() * Eigen::MatrixXd(sub) * inv_sqrt_deg.asDiagonal());
    lap.diagonal().array() += 1.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
    if (solver.info() != Eigen::Success) return std::nullopt;
    return Eigen::MatrixXd(solver.eigenvectors().middleCols(1, std::min<Eigen::Index>(dim, n - 1)));
}

// Lanczos with full reorthogonalisation on M' = D^-1/2 A D^-1/2 - u0 u0^T, where u0 spans the
// trivial eigenvector. The largest eigenvalues of M' give the smallest nontrivial ones of L.
std::optional<Eigen::MatrixXd> lanczos_eigenvectors(const SparseGraph& sub, const Eigen::VectorXd& inv_sqrt_deg,
                                                    const Eigen::VectorXd& u0, int dim, std::uint64_t seed) {
    const Eigen::Index n = sub.rows();
    const Eigen::Index max_steps = std::min<Eigen::Index>(n - 1, kMaxLanczosSteps);
    Eigen::MatrixXd basis(n, max_steps + 1);
    std::vector<double> alphas, betas;

    auto apply = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd y = inv_sqrt_deg.cwiseProduct(sub * inv_sqrt_deg.cwiseProduct(x));
        y -= u0 * u0.dot(x);
        return y;
    };

    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = 1.0 + 0.5 * (static_cast<double>(mix64(seed, static_cast<std::uint64_t>(i)) >> 11) * 0x1.0p-53 - 0.5);
    }
    v -= u0 * u0.dot(v);
    v.normalize();
    basis.col(0) = v;

    for (Eigen::Index j = 0; j < max_steps; ++j) {
        Eigen::VectorXd w = apply(basis.col(j));
        const double a = basis.col(j).dot(w);
        alphas.push_back(a);
        for (int pass = 0; pass < 2; ++pass) {
            w -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).transpose() * w);
            w -= u0 * u0.dot(w);
        }
        const double b = w.norm();
        const Eigen::Index m = j + 1;
        const bool breakdown = b < 1e-12;
        if (m >= dim && (breakdown || m % 10 == 0 || m == max_steps)) {
            Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alphas.data(), m);
            Eigen::VectorXd sub_diag = m > 1 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(betas.data(), m - 1))
                                             : Eigen::VectorXd();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
            tri.computeFromTridiagonal(diag, sub_diag, Eigen::ComputeEigenvectors);
            if (tri.info() != Eigen::Success) return std::nullopt;
            bool converged = true;
            for (int c = 0; c < dim; ++c) {
                const Eigen::Index col = m - 1 - c;  // ascending order; take the top
                if (b * std::abs(tri.eigenvectors()(m - 1, col)) > kResidualTol) converged = false;
            }
            if (converged) {
                Eigen::MatrixXd ritz(n, dim);
                for (int c = 0; c < dim; ++c) {
                    ritz.col(c) = basis.leftCols(m) * tri.eigenvectors().col(m - 1 - c);
                }
                return ritz;
            }
            if (breakdown) return std::nullopt;
        }
        if (breakdown) return std::nullopt;
        betas.push_back(b);
        basis.col(j + 1) = w / b;
    }
    return std::nullopt;
}

std::optional<Eigen::MatrixXd> component_layout(const SparseGraph& a, const std::vector<int>& vertices, int dim,
                                                std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(vertices.size());
    std::vector<int> local(static_cast<std::size_t>(a.rows()), -1);
    for (Eigen::Index i = 0; i < n; ++i) local[static_cast<std::size_t>(vertices[i])] = static_cast<int>(i);

    std::vector<Eigen::Triplet<double, int>> trip;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (SparseGraph::InnerIterator it(a, vertices[i]); it; ++it) {
            const int j = local[static_cast<std::size_t>(it.col())];
            if (j >= 0 && it.value() != 0.0) trip.emplace_back(static_cast<int>(i), j, it.value());
        }
    }
    SparseGraph sub(n, n);
    sub.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd deg = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (SparseGraph::InnerIterator it(sub, i); it; ++it) deg[i] += it.value();
    }
    if ((deg.array() <= 0.0).any()) return std::nullopt;
    const Eigen::VectorXd inv_sqrt_deg = deg.cwiseSqrt().cwiseInverse();

    std::optional<Eigen::MatrixXd> vecs;
    if (n <= kDenseLimit) {
        vecs = dense_eigenvectors(sub, inv_sqrt_deg, dim);
    } else {
        const Eigen::VectorXd u0 = deg.cwiseSqrt().normalized();
        vecs = lanczos_eigenvectors(sub, inv_sqrt_deg, u0, dim, seed);
    }
    if (!vecs || !vecs->allFinite() || vecs->cols() < dim) return std::nullopt;
    fix_signs(*vecs);
    const double scale = vecs->cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) return std::nullopt;
    return Eigen::MatrixXd(*vecs / scale);
}

}  // namespace

std::vector<int> connected_components(const SparseGraph& a, int* count) {
    const auto n = static_cast<std::size_t>(a.rows());
    std::vector<int> label(n, -1);
    int next = 0;
    std::vector<int> stack;
    for (std::size_t s = 0; s < n; ++s) {
        if (label[s] >= 0) continue;
        label[s] = next;
        stack.assign(1, static_cast<int>(s));
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (SparseGraph::InnerIterator it(a, v); it; ++it) {
                if (it.value() == 0.0) continue;
                auto& l = label[static_cast<std::size_t>(it.col())];
                if (l < 0) {
                    l = next;
                    stack.push_back(static_cast<int>(it.col()));
                }
            }
        }
        ++next;
    }
    if (count) *count = next;
    return label;
}

RowMatrix spectral_init_exact(const SparseGraph& a, int dim, std::uint64_t seed, SpectralDiagnostics* diagnostics) {
    if (dim < 1) throw Error(ErrorKind::Parameter, "spectral_init: dim must be positive");
    int n_comp = 0;
    const auto label = connected_components(a, &n_comp);
    std::vector<std::vector<int>> members(static_cast<std::size_t>(n_comp));
    for (std::size_t i = 0; i < label.size(); ++i) members[static_cast<std::size_t>(label[i])].push_back(static_cast<int>(i));

    SpectralDiagnostics diag;
    diag.components = n_comp;
    RowMatrix out(a.rows(), dim);

    // Cell grid: g cells per axis, component c at the cell given by its base-g digits.
    int per_axis = 1;
    while (std::pow(per_axis, dim) < n_comp) ++per_axis;
    const double cell = 20.0 / per_axis;
    const double half_extent = n_comp == 1 ? 10.0 : 0.45 * cell;

    for (int c = 0; c < n_comp; ++c) {
        const auto& verts = members[static_cast<std::size_t>(c)];
        std::optional<Eigen::MatrixXd> local;
        if (static_cast<int>(verts.size()) > dim + 1) {
            local = component_layout(a, verts, dim, mix64(seed, static_cast<std::uint64_t>(c)));
            if (!local) {
                spdlog::warn("spectral_init: eigensolver failed on component {} ({} points); random init", c,
                             verts.size());
            }
        }
        if (local) {
            ++diag.spectral_components;
        } else {
            ++diag.random_components;
            std::mt19937_64 rng(mix64(seed, 0x5eed0000ULL + static_cast<std::uint64_t>(c)));
            std::uniform_real_distribution<double> unif(-1.0, 1.0);
            local = Eigen::MatrixXd(static_cast<Eigen::Index>(verts.size()), dim);
            for (Eigen::Index i = 0; i < local->rows(); ++i) {
                for (int d = 0; d < dim; ++d) (*local)(i, d) = unif(rng);
            }
        }
        Eigen::RowVectorXd center = Eigen::RowVectorXd::Zero(dim);
        if (n_comp > 1) {
            int rest = c;
            for (int d = 0; d < dim; ++d) {
                center[d] = -10.0 + cell * (rest % per_axis + 0.5);
                rest /= per_axis;
            }
        }
        for (std::size_t i = 0; i < verts.size(); ++i) {
            out.row(verts[i]) = center + half_extent * local->row(static_cast<Eigen::Index>(i));
        }
    }
    if (diagnostics) *diagnostics = diag;
    return out;
}

RowMatrix spectral_init(const SparseGraph& a, int dim, std::uint64_t seed, SpectralDiagnostics* diagnostics) {
    RowMatrix y = spectral_init_exact(a, dim, seed, diagnostics);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-1e-4, 1e-4);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        for (Eigen::Index d = 0; d < y.cols(); ++d) y(i, d) += jitter(rng);
    }
    return y;
}

}  // namespace fmprog::umap
