#pragma once

#include "fmprog/dataset/preprocess.hpp"
#include "fmprog/eval/metrics.hpp"
#include "fmprog/joint/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fmprog::joint {

struct TrainConfig {
    LossConfig loss;
    int epochs = 2000;
    int batch_size = 64;
    double learning_rate = 1e-4;
    std::uint64_t seed = 42;
    int validate_every = 0;  // epochs between validation passes; 0 disables

    void validate() const;
};

struct Adam {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    Eigen::VectorXd m, v;

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;            // objective per instance
    double classification = 0.0;  // per instance, unweighted
    double regression = 0.0;
    double monotonic = 0.0;
    std::optional<double> validation_rmse;
    std::optional<double> validation_mr;
};

struct TrainResult {
    JointModel model;
    std::vector<EpochRecord> log;
    bool diverged = false;   // model then holds the last parameters with a finite loss
    std::string message;
};

/// Unit-contiguous batches in cycle order; never spans two units. Returns index lists into instances.
std::vector<std::vector<std::size_t>> make_batches(std::span<const dataset::WindowInstance> instances, int batch_size);

Batch gather(std::span<const dataset::WindowInstance> instances, std::span<const std::size_t> indices);

/// Adam on the mean per-instance objective, batch order reshuffled each epoch from the seed.
TrainResult train(std::span<const dataset::WindowInstance> instances, const Architecture& arch, const TrainConfig& config,
                  std::span<const dataset::WindowInstance> validation = {});

/// Scale and offset used to initialise the RUL heads from training targets.
std::pair<double, double> rul_scaling(std::span<const dataset::WindowInstance> instances);

struct UnitPrediction {
    int unit_id = 0;
    int end_cycle = 0;
    double truth = 0.0;
    double rul = 0.0;
    std::vector<double> mode_rul;
    std::vector<double> probabilities;
};

/// One prediction per window, in the given order (callers pass a unit's windows in cycle order).
std::vector<UnitPrediction> predict_sequence(const JointModel& model, std::span<const dataset::WindowInstance> windows,
                                             int chunk = 256);

std::vector<eval::Prediction> to_eval(std::span<const UnitPrediction> preds);

void write_predictions_csv(const std::filesystem::path& file, std::span<const UnitPrediction> preds);

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_parameter = 0;
    std::size_t parameters = 0;
    double kink_margin = 0.0;  // objective is smooth within this distance of every kink
};

/// Analytic gradient of the summed objective against central differences with the given step.
/// Relative error uses max(|analytic|, |numeric|, 1e-6 max(1, |L|)) as denominator.
/// Checks every parameter, or only `subset` when it is non-empty.
GradCheckReport grad_check(const JointModel& model, const Batch& batch, const LossConfig& config, double step = 1e-5,
                           std::span<const Eigen::Index> subset = {});

struct HiddenSizes {
    int first = 16;
    int second = 16;
};
std::vector<HiddenSizes> hidden_grid();

/// A configuration is skipped when its trainable parameters exceed 2/3 of the training instances.
bool admissible(const Architecture& arch, std::size_t training_instances);

/// Unit ids shuffled with the seed and dealt into k folds of near-equal size.
std::vector<std::vector<int>> unit_folds(std::vector<int> unit_ids, int k, std::uint64_t seed);

struct FoldResult {
    int fold = 0;
    std::vector<int> validation_units;
    eval::MetricReport report;               // held-out units
    std::optional<eval::MetricReport> test;  // fold model on the test set, when given
    std::vector<EpochRecord> log;
    bool diverged = false;
};

struct CrossValidation {
    Architecture arch;
    std::vector<FoldResult> folds;
    eval::MetricReport summary;  // pooled over held-out units with per-fold statistics attached
    std::optional<eval::MetricReport> test_summary;  // pooled test predictions of all fold models
};

/// Trains one model per fold on the other folds' units. Fold models are also scored on `test` when it is
/// non-empty.
CrossValidation cross_validate(std::span<const dataset::WindowInstance> instances, const Architecture& arch,
                               const TrainConfig& config, int folds = 5,
                               std::span<const dataset::WindowInstance> test = {});

struct GridSearch {
    std::vector<CrossValidation> candidates;
    std::vector<HiddenSizes> skipped;
    std::size_t best = 0;
    bool fallback = false;  // every configuration was inadmissible; the smallest one was used
};

/// Cross-validates every admissible hidden-size pair and selects the lowest mean fold RMSE.
GridSearch grid_search(std::span<const dataset::WindowInstance> instances, Architecture arch, const TrainConfig& config,
                       std::span<const HiddenSizes> grid, int folds = 5);

struct Checkpoint {
    JointModel model;
    TrainConfig config;
    nlohmann::json metadata;  // scaler stats, mode map, upstream hashes
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& file);

nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const EpochRecord& record);

}  // namespace fmprog::joint
