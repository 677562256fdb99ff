#pragma once

#include "fmprog/dataset/cmapss.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fmprog::dataset {

enum class DropReason { SingleValue, MostlyMissing, LowStd };

const char* to_string(DropReason reason);

struct DroppedSensor {
    std::string name;
    DropReason reason;
};

struct SensorFilterReport {
    std::vector<DroppedSensor> dropped;
    std::vector<std::string> retained;
};

struct SensorFilterOptions {
    double min_std = 0.01;
    double max_missing_fraction = 0.5;  // dropped when missing >= this fraction
};

struct FilterResult {
    std::vector<UnitSeries> units;
    SensorFilterReport report;
};

/// Drops non-informative sensors using statistics pooled over every row of every unit.
FilterResult filter_sensors(const std::vector<UnitSeries>& units, const SensorFilterOptions& options = {});

/// Keeps only the report's retained sensors (in that order). Residual NaN is an integrity error.
std::vector<UnitSeries> select_sensors(const std::vector<UnitSeries>& units, const SensorFilterReport& report);

struct ScalerStats {
    std::vector<std::string> sensor_names;
    std::vector<double> min;
    std::vector<double> max;
};

ScalerStats fit_minmax(const std::vector<UnitSeries>& train);

/// Scales with the given statistics; values outside the fitted range are clamped to [0,1].
std::vector<UnitSeries> apply_minmax(const std::vector<UnitSeries>& units, const ScalerStats& stats);

struct NormalizeResult {
    std::vector<UnitSeries> train;
    std::vector<UnitSeries> test;
    ScalerStats stats;
};

NormalizeResult normalize_minmax(const std::vector<UnitSeries>& train, const std::vector<UnitSeries>& test);

/// A sliding-window slice of one unit, rows t-ntw+1 .. t.
struct WindowInstance {
    int unit_id = 0;
    int end_cycle = 0;
    RowMatrix x;  // ntw x S
    double rul_target = 0.0;
    std::optional<int> mode;  // failure-mode index, absent for unlabeled data
    int padded_rows = 0;      // leading rows repeated from the first observation

    std::vector<double> one_hot(int mode_count) const;
};

struct WindowOptions {
    int ntw = 60;
    int stride = 1;
    bool pad_short = false;
};

struct WindowSet {
    std::vector<WindowInstance> instances;
    std::vector<int> skipped_units;  // shorter than ntw with pad_short off
};

WindowSet make_windows(const std::vector<UnitSeries>& units, const WindowOptions& options);

/// Number of windows produced without padding: sum_i max(0, floor((T_i - ntw) / stride) + 1).
std::size_t expected_window_count(const std::vector<UnitSeries>& units, int ntw, int stride);

}  // namespace fmprog::dataset
