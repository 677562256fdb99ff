#pragma once

#include "fmprog/dataset/cmapss.hpp"
#include "fmprog/dataset/preprocess.hpp"
#include "fmprog/trajectory/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

// Synthetic stand-ins for C-MAPSS-shaped data used by unit and integration tests.
namespace fmprog::fixtures {

struct FleetSpec {
    int units = 20;
    int min_life = 90;
    int max_life = 150;
    int modes = 2;        // unit i fails in mode i % modes
    int conditions = 1;   // 1 or 6 operating regimes, drawn per cycle
    double noise = 0.01;
    std::uint64_t seed = 7;
};

struct Fleet {
    std::vector<dataset::RawRecord> train;
    std::vector<dataset::RawRecord> test;
    std::vector<int> truth;       // RUL at truncation per test unit
    std::vector<int> train_modes; // generating mode per train unit, in unit order
};

Fleet make_fleet(const FleetSpec& spec);

/// Writes train_<id>.txt, test_<id>.txt and RUL_<id>.txt under root.
void write_fleet(const std::filesystem::path& root, const std::string& dataset_id, const Fleet& fleet);

/// Two-mode toy regression task: feature 0 is a mode-dependent ramp, feature 1 a mode flag with
/// noise. RUL targets decrease by one per cycle.
std::vector<dataset::WindowInstance> ramp_instances(int units, int life, int window, std::uint64_t seed,
                                                   double noise = 0.01);

RowMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0);

/// 1-D trajectory from values.
trajectory::Trajectory path1d(int unit_id, const std::vector<double>& values);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace fmprog::fixtures
