#include "fmprog/dataset/store.hpp"

#include "fmprog/csv.hpp"
#include "fmprog/error.hpp"

#include <json.hpp>

#include <fstream>
#include <map>

namespace fmprog::dataset {

namespace {

using nlohmann::json;

constexpr const char* kTrainSeries = "train_series.csv";
constexpr const char* kTestSeries = "test_series.csv";
constexpr const char* kTrainWindows = "windows_train.csv";
constexpr const char* kTestWindows = "windows_test.csv";
constexpr const char* kManifest = "dataset_manifest.json";

void write_window_index(const std::filesystem::path& file, const WindowSet& set) {
    std::ofstream out(file);
    out << "unit_id,end_cycle,rul_target,padded_rows\n";
    for (const auto& w : set.instances) {
        out << w.unit_id << ',' << w.end_cycle << ',' << csv::format(w.rul_target) << ',' << w.padded_rows << '\n';
    }
}

json window_json(const WindowOptions& w) {
    return {{"ntw", w.ntw}, {"stride", w.stride}, {"pad_short", w.pad_short}};
}

WindowOptions window_from_json(const json& j) {
    return {j.at("ntw").get<int>(), j.at("stride").get<int>(), j.at("pad_short").get<bool>()};
}

}  // namespace

std::vector<std::string> dataset_files() {
    return {kTrainSeries, kTestSeries, kTrainWindows, kTestWindows, kManifest};
}

void write_series_csv(const std::filesystem::path& file, const std::vector<UnitSeries>& units) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + file.string());
    out << "unit_id,cycle,rul,op_1,op_2,op_3";
    if (!units.empty()) {
        for (const auto& name : units.front().sensor_names) out << ',' << name;
    }
    out << '\n';
    for (const auto& u : units) {
        for (int t = 0; t < u.length(); ++t) {
            out << u.unit_id << ',' << (t + 1) << ',';
            if (u.has_rul()) out << u.rul[t];
            for (Eigen::Index j = 0; j < u.op_settings.cols(); ++j) out << ',' << csv::format(u.op_settings(t, j));
            for (Eigen::Index j = 0; j < u.sensors.cols(); ++j) out << ',' << csv::format(u.sensors(t, j));
            out << '\n';
        }
    }
}

std::vector<UnitSeries> read_series_csv(const std::filesystem::path& file) {
    auto table = csv::read(file);
    constexpr std::size_t kFixed = 6;
    if (table.header.size() < kFixed) throw Error(ErrorKind::Parse, file.string() + ": bad header");
    std::vector<std::string> names(table.header.begin() + kFixed, table.header.end());

    std::map<int, std::vector<const std::vector<std::string>*>> by_unit;
    for (const auto& row : table.rows) by_unit[csv::parse_int(row[0])].push_back(&row);

    std::vector<UnitSeries> units;
    for (const auto& [unit_id, rows] : by_unit) {
        UnitSeries u;
        u.unit_id = unit_id;
        u.sensor_names = names;
        const auto t_len = static_cast<Eigen::Index>(rows.size());
        u.sensors.resize(t_len, static_cast<Eigen::Index>(names.size()));
        u.op_settings.resize(t_len, 3);
        bool labeled = true;
        for (Eigen::Index t = 0; t < t_len; ++t) {
            const auto& row = *rows[t];
            if (csv::parse_int(row[1]) != t + 1) {
                throw Error(ErrorKind::Integrity, file.string() + ": unit " + std::to_string(unit_id) +
                                                      " has non-consecutive cycles");
            }
            if (row[2].empty()) {
                labeled = false;
            } else {
                u.rul.push_back(csv::parse_int(row[2]));
            }
            for (int j = 0; j < 3; ++j) u.op_settings(t, j) = csv::parse_double(row[3 + j]);
            for (std::size_t j = 0; j < names.size(); ++j) {
                u.sensors(t, static_cast<Eigen::Index>(j)) = csv::parse_double(row[kFixed + j]);
            }
        }
        if (!labeled) u.rul.clear();
        units.push_back(std::move(u));
    }
    return units;
}

void save_dataset(const std::filesystem::path& dir, const PreparedDataset& data) {
    std::filesystem::create_directories(dir);
    write_series_csv(dir / kTrainSeries, data.train);
    write_series_csv(dir / kTestSeries, data.test);
    write_window_index(dir / kTrainWindows, make_windows(data.train, data.train_windows));
    write_window_index(dir / kTestWindows, make_windows(data.test, data.test_windows));

    json dropped = json::array();
    for (const auto& d : data.filter_report.dropped) dropped.push_back({{"name", d.name}, {"reason", to_string(d.reason)}});
    json manifest = {
        {"dataset_id", data.dataset_id},
        {"filter_report", {{"dropped", dropped}, {"retained", data.filter_report.retained}}},
        {"scaler", {{"sensors", data.scaler.sensor_names}, {"min", data.scaler.min}, {"max", data.scaler.max}}},
        {"train_windows", window_json(data.train_windows)},
        {"test_windows", window_json(data.test_windows)},
        {"train_units", data.train.size()},
        {"test_units", data.test.size()},
        {"shards", {kTrainSeries, kTestSeries, kTrainWindows, kTestWindows}},
    };
    std::ofstream(dir / kManifest) << manifest.dump(2) << '\n';
}

PreparedDataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / kManifest);
    if (!in) throw Error(ErrorKind::MissingArtifact, "no dataset manifest in " + dir.string() + "; run preprocess first");
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, (dir / kManifest).string() + ": " + e.what());
    }
    PreparedDataset data;
    data.dataset_id = manifest.at("dataset_id").get<std::string>();
    for (const auto& d : manifest.at("filter_report").at("dropped")) {
        const auto reason = d.at("reason").get<std::string>();
        DropReason r = reason == "single-value" ? DropReason::SingleValue
                       : reason == "missing"    ? DropReason::MostlyMissing
                                                : DropReason::LowStd;
        data.filter_report.dropped.push_back({d.at("name").get<std::string>(), r});
    }
    data.filter_report.retained = manifest.at("filter_report").at("retained").get<std::vector<std::string>>();
    data.scaler.sensor_names = manifest.at("scaler").at("sensors").get<std::vector<std::string>>();
    data.scaler.min = manifest.at("scaler").at("min").get<std::vector<double>>();
    data.scaler.max = manifest.at("scaler").at("max").get<std::vector<double>>();
    data.train_windows = window_from_json(manifest.at("train_windows"));
    data.test_windows = window_from_json(manifest.at("test_windows"));
    data.train = read_series_csv(dir / kTrainSeries);
    data.test = read_series_csv(dir / kTestSeries);
    return data;
}

}  // namespace fmprog::dataset
