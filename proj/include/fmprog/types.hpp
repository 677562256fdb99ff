#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstdint>

namespace fmprog {

/// Row-major dense matrix; one observation per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Identifies one observation: a unit at a given cycle.
struct RowKey {
    int unit_id = 0;
    int cycle = 0;

    auto operator<=>(const RowKey&) const = default;
};

/// splitmix64 finalizer; used for counter-based, order-independent random streams.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(a ^ mix64(b));
}

}  // namespace fmprog
