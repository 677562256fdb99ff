#pragma once

#include "fmprog/types.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fmprog::dataset {

inline constexpr int kOpSettingCount = 3;
inline constexpr int kSensorCount = 21;
inline constexpr int kColumnCount = 2 + kOpSettingCount + kSensorCount;

inline constexpr std::array<std::string_view, kSensorCount> kSensorNames = {
    "T2",  "T24", "T30", "T50",  "P2",   "P15",  "P30",     "Nf",     "Nc",        "epr", "Ps30",
    "phi", "NRf", "NRc", "BPR", "farB", "htBleed", "Nf_dmd", "PCNfR_dmd", "W31", "W32"};

enum class Split { Train, Test };

/// One row of a C-MAPSS text file. Missing readings are NaN.
struct RawRecord {
    int unit_id = 0;
    int cycle = 0;
    std::array<double, kOpSettingCount> op_settings{};
    std::array<double, kSensorCount> sensors{};
};

/// One unit's time series. Row t-1 holds cycle t.
struct UnitSeries {
    int unit_id = 0;
    std::vector<std::string> sensor_names;
    RowMatrix sensors;      // T x S
    RowMatrix op_settings;  // T x 3
    std::vector<int> rul;   // empty when no labels are known (test split without truth file)

    int length() const { return static_cast<int>(sensors.rows()); }
    int sensor_count() const { return static_cast<int>(sensors.cols()); }
    bool has_rul() const { return !rul.empty(); }
};

std::vector<RawRecord> parse_records(std::istream& in);
void write_records(std::ostream& out, const std::vector<RawRecord>& records);

/// Groups records into units. Cycles must run 1, 2, ... within each unit.
std::vector<UnitSeries> group_units(const std::vector<RawRecord>& records);

/// Reads the companion truth file: one RUL (at truncation) per test unit, in unit order.
std::vector<int> read_rul_truth(std::istream& in);

/// Labels RUL in place. Training units: T_i - t. Test units: truth + (T_i - t).
void label_rul(std::vector<UnitSeries>& units, Split split, const std::vector<int>* truth);

std::vector<UnitSeries> load_cmapss(const std::filesystem::path& path, Split split,
                                    const std::optional<std::filesystem::path>& rul_truth_path = {});

/// Canonical file names of a sub-dataset (e.g. "FD003") under a root directory.
struct CmapssFiles {
    std::filesystem::path train;
    std::filesystem::path test;
    std::filesystem::path rul;
};
CmapssFiles cmapss_files(const std::filesystem::path& root, std::string_view dataset_id);

/// Working-condition id per row: op settings rounded to (0, 2, 0) decimals, ids assigned
/// in first-seen order over units and cycles.
std::vector<int> working_condition_ids(const std::vector<UnitSeries>& units);

}  // namespace fmprog::dataset
