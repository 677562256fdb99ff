#pragma once

#include "fmprog/dataset/preprocess.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fmprog::dataset {

/// Output of the preprocessing stage: filtered, normalized series plus everything needed
/// to rebuild identical windows later.
struct PreparedDataset {
    std::string dataset_id;
    std::vector<UnitSeries> train;
    std::vector<UnitSeries> test;
    SensorFilterReport filter_report;
    ScalerStats scaler;
    WindowOptions train_windows;
    WindowOptions test_windows;
};

/// Files written by save_dataset, relative to the dataset directory.
std::vector<std::string> dataset_files();

/// Writes train/test series CSV shards, window index CSVs and dataset_manifest.json.
void save_dataset(const std::filesystem::path& dir, const PreparedDataset& data);
PreparedDataset load_dataset(const std::filesystem::path& dir);

void write_series_csv(const std::filesystem::path& file, const std::vector<UnitSeries>& units);
std::vector<UnitSeries> read_series_csv(const std::filesystem::path& file);

}  // namespace fmprog::dataset
