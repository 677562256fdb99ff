#pragma once

#include "fmprog/joint/train.hpp"
#include "fmprog/umap/embed.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace fmprog::pipeline {

/// Environment variable naming the directory that holds the C-MAPSS text files.
inline constexpr const char* kDatasetRootEnv = "CMAPSS_ROOT";

struct DatasetBlock {
    std::string id = "FD003";
    std::filesystem::path root;  // empty: taken from CMAPSS_ROOT
};

struct PreprocessBlock {
    int ntw = 60;
    int stride = 1;
    bool pad_short = true;  // test units only; training units shorter than ntw are skipped
    double min_std = 0.01;
    double max_missing = 0.5;
};

struct ClusterBlock {
    int modes = 0;  // 0 selects the count automatically
    int max_modes = 4;
    double elbow_threshold = 0.5;
    int restarts = 10;
    int max_iterations = 100;
    double tolerance = 1e-4;
    std::uint64_t seed = 42;
};

struct TrainBlock {
    joint::TrainConfig config;
    std::vector<joint::HiddenSizes> hidden;  // one entry: fixed sizes; several: grid search
    int folds = 5;
};

struct ReproduceBlock {
    std::vector<double> etas = {0.0, 0.5, 1.0};
    std::vector<double> lambdas = {1.0, 10.0, std::numeric_limits<double>::infinity()};
};

struct RunConfig {
    DatasetBlock dataset;
    PreprocessBlock preprocess;
    umap::UmapConfig umap;
    ClusterBlock cluster;
    TrainBlock train;
    ReproduceBlock reproduce;

    RunConfig();

    /// Range checks on every block. Throws Parameter.
    void validate() const;

    /// Root directory of the raw files: the configured path, else $CMAPSS_ROOT. Throws Config if neither
    /// is set.
    std::filesystem::path dataset_root() const;

    /// Replaces every seed (UMAP, clustering, training).
    void set_seed(std::uint64_t seed);
};

/// Reads a line-oriented INI file with [dataset], [preprocess], [umap], [cluster], [train] and
/// [reproduce] sections. Unset keys keep their defaults; unknown keys are configuration errors.
RunConfig load_config(const std::filesystem::path& file);
RunConfig parse_config(std::istream& in);

/// INI text that parses back to the same configuration.
std::string render_config(const RunConfig& config);

/// Canonical JSON of each block, used for stage hashing.
nlohmann::json to_json(const DatasetBlock& b);
nlohmann::json to_json(const PreprocessBlock& b);
nlohmann::json to_json(const umap::UmapConfig& b);
nlohmann::json to_json(const ClusterBlock& b);
nlohmann::json to_json(const TrainBlock& b);
nlohmann::json to_json(const ReproduceBlock& b);
nlohmann::json to_json(const RunConfig& c);

}  // namespace fmprog::pipeline
