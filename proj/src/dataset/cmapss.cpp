#include "fmprog/dataset/cmapss.hpp"

#include "fmprog/csv.hpp"
#include "fmprog/error.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace fmprog::dataset {

namespace {

std::vector<std::string_view> tokenize(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

int as_index(std::string_view token, std::size_t line_no, const char* what) {
    double v = csv::parse_double(token);
    if (!std::isfinite(v) || v < 1 || v != std::floor(v)) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": invalid " + what + " '" +
                                          std::string(token) + "'");
    }
    return static_cast<int>(v);
}

}  // namespace

std::vector<RawRecord> parse_records(std::istream& in) {
    std::vector<RawRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        if (tokens.size() != kColumnCount) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(kColumnCount) + " columns, got " +
                                              std::to_string(tokens.size()));
        }
        RawRecord rec;
        rec.unit_id = as_index(tokens[0], line_no, "unit id");
        rec.cycle = as_index(tokens[1], line_no, "cycle");
        try {
            for (int j = 0; j < kOpSettingCount; ++j) rec.op_settings[j] = csv::parse_double(tokens[2 + j]);
            for (int j = 0; j < kSensorCount; ++j) {
                rec.sensors[j] = csv::parse_double(tokens[2 + kOpSettingCount + j]);
            }
        } catch (const Error& e) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
        }
        records.push_back(rec);
    }
    return records;
}

void write_records(std::ostream& out, const std::vector<RawRecord>& records) {
    for (const auto& rec : records) {
        out << rec.unit_id << ' ' << rec.cycle;
        for (double v : rec.op_settings) out << ' ' << csv::format(v);
        for (double v : rec.sensors) out << ' ' << csv::format(v);
        out << '\n';
    }
}

std::vector<UnitSeries> group_units(const std::vector<RawRecord>& records) {
    std::map<int, std::vector<const RawRecord*>> by_unit;
    for (const auto& rec : records) by_unit[rec.unit_id].push_back(&rec);

    std::vector<UnitSeries> units;
    units.reserve(by_unit.size());
    for (const auto& [unit_id, rows] : by_unit) {
        UnitSeries u;
        u.unit_id = unit_id;
        u.sensor_names.assign(kSensorNames.begin(), kSensorNames.end());
        const auto t_len = static_cast<Eigen::Index>(rows.size());
        u.sensors.resize(t_len, kSensorCount);
        u.op_settings.resize(t_len, kOpSettingCount);
        for (Eigen::Index t = 0; t < t_len; ++t) {
            const RawRecord& rec = *rows[t];
            if (rec.cycle != t + 1) {
                throw Error(ErrorKind::Integrity, "unit " + std::to_string(unit_id) + ": expected cycle " +
                                                      std::to_string(t + 1) + ", found " +
                                                      std::to_string(rec.cycle));
            }
            for (int j = 0; j < kSensorCount; ++j) u.sensors(t, j) = rec.sensors[j];
            for (int j = 0; j < kOpSettingCount; ++j) u.op_settings(t, j) = rec.op_settings[j];
        }
        units.push_back(std::move(u));
    }
    return units;
}

std::vector<int> read_rul_truth(std::istream& in) {
    std::vector<int> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        double v = csv::parse_double(tokens.front());
        if (!std::isfinite(v) || v < 0 || v != std::floor(v)) {
            throw Error(ErrorKind::Parse, "RUL truth line " + std::to_string(line_no) + ": invalid value");
        }
        out.push_back(static_cast<int>(v));
    }
    return out;
}

void label_rul(std::vector<UnitSeries>& units, Split split, const std::vector<int>* truth) {
    if (split == Split::Test && truth == nullptr) {
        for (auto& u : units) u.rul.clear();
        return;
    }
    if (split == Split::Test && truth->size() != units.size()) {
        throw Error(ErrorKind::Integrity, "RUL truth has " + std::to_string(truth->size()) + " entries for " +
                                              std::to_string(units.size()) + " test units");
    }
    for (std::size_t i = 0; i < units.size(); ++i) {
        auto& u = units[i];
        const int offset = split == Split::Train ? 0 : (*truth)[i];
        const int t_len = u.length();
        u.rul.resize(t_len);
        for (int t = 1; t <= t_len; ++t) u.rul[t - 1] = offset + (t_len - t);
    }
}

std::vector<UnitSeries> load_cmapss(const std::filesystem::path& path, Split split,
                                    const std::optional<std::filesystem::path>& rul_truth_path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingArtifact, "cannot open " + path.string());
    std::vector<RawRecord> records;
    try {
        records = parse_records(in);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
    auto units = group_units(records);
    if (split == Split::Train) {
        label_rul(units, split, nullptr);
    } else if (rul_truth_path) {
        std::ifstream tin(*rul_truth_path);
        if (!tin) throw Error(ErrorKind::MissingArtifact, "cannot open " + rul_truth_path->string());
        auto truth = read_rul_truth(tin);
        label_rul(units, split, &truth);
    }
    return units;
}

CmapssFiles cmapss_files(const std::filesystem::path& root, std::string_view dataset_id) {
    const std::string id(dataset_id);
    return {root / ("train_" + id + ".txt"), root / ("test_" + id + ".txt"), root / ("RUL_" + id + ".txt")};
}

std::vector<int> working_condition_ids(const std::vector<UnitSeries>& units) {
    std::map<std::tuple<long, long, long>, int> ids;
    std::vector<int> out;
    for (const auto& u : units) {
        for (int t = 0; t < u.length(); ++t) {
            auto key = std::make_tuple(std::lround(u.op_settings(t, 0)), std::lround(u.op_settings(t, 1) * 100.0),
                                       std::lround(u.op_settings(t, 2)));
            auto [it, inserted] = ids.try_emplace(key, static_cast<int>(ids.size()));
            out.push_back(it->second);
        }
    }
    return out;
}

}  // namespace fmprog::dataset
