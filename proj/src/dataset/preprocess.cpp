#include "fmprog/dataset/preprocess.hpp"

#include "fmprog/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace fmprog::dataset {

const char* to_string(DropReason reason) {
    switch (reason) {
    case DropReason::SingleValue: return "single-value";
    case DropReason::MostlyMissing: return "missing";
    case DropReason::LowStd: return "low-std";
    }
    return "unknown";
}

FilterResult filter_sensors(const std::vector<UnitSeries>& units, const SensorFilterOptions& options) {
    if (units.empty()) throw Error(ErrorKind::Parameter, "filter_sensors: no units");
    const auto& names = units.front().sensor_names;
    const int sensor_count = units.front().sensor_count();
    for (const auto& u : units) {
        if (u.sensor_names != names) throw Error(ErrorKind::Contract, "filter_sensors: units disagree on sensor set");
    }

    SensorFilterReport report;
    for (int s = 0; s < sensor_count; ++s) {
        std::set<double> distinct;
        std::size_t total = 0, missing = 0, count = 0;
        double mean = 0.0, m2 = 0.0;  // Welford, pooled over all rows
        for (const auto& u : units) {
            for (int t = 0; t < u.length(); ++t) {
                const double v = u.sensors(t, s);
                ++total;
                if (std::isnan(v)) {
                    ++missing;
                    continue;
                }
                if (distinct.size() < 2) distinct.insert(v);
                ++count;
                const double delta = v - mean;
                mean += delta / static_cast<double>(count);
                m2 += delta * (v - mean);
            }
        }
        const double std_dev = count > 1 ? std::sqrt(m2 / static_cast<double>(count - 1)) : 0.0;
        const double missing_fraction = total == 0 ? 1.0 : static_cast<double>(missing) / static_cast<double>(total);

        std::optional<DropReason> reason;
        if (distinct.size() == 1) {
            reason = DropReason::SingleValue;
        } else if (missing_fraction >= options.max_missing_fraction || distinct.empty()) {
            reason = DropReason::MostlyMissing;
        } else if (std_dev < options.min_std) {
            reason = DropReason::LowStd;
        }
        if (reason) {
            report.dropped.push_back({names[s], *reason});
        } else {
            report.retained.push_back(names[s]);
        }
    }
    if (report.retained.empty()) {
        throw Error(ErrorKind::Config, "filter_sensors: every sensor was dropped");
    }
    return {select_sensors(units, report), report};
}

std::vector<UnitSeries> select_sensors(const std::vector<UnitSeries>& units, const SensorFilterReport& report) {
    std::vector<UnitSeries> out;
    out.reserve(units.size());
    for (const auto& u : units) {
        std::vector<int> cols;
        for (const auto& name : report.retained) {
            auto it = std::find(u.sensor_names.begin(), u.sensor_names.end(), name);
            if (it == u.sensor_names.end()) {
                throw Error(ErrorKind::Contract, "unit " + std::to_string(u.unit_id) + " lacks sensor " + name);
            }
            cols.push_back(static_cast<int>(it - u.sensor_names.begin()));
        }
        UnitSeries v;
        v.unit_id = u.unit_id;
        v.sensor_names = report.retained;
        v.op_settings = u.op_settings;
        v.rul = u.rul;
        v.sensors.resize(u.length(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) v.sensors.col(static_cast<Eigen::Index>(j)) = u.sensors.col(cols[j]);
        if (v.sensors.hasNaN()) {
            throw Error(ErrorKind::Integrity, "unit " + std::to_string(u.unit_id) + ": missing values remain after sensor filtering");
        }
        out.push_back(std::move(v));
    }
    return out;
}

ScalerStats fit_minmax(const std::vector<UnitSeries>& train) {
    if (train.empty()) throw Error(ErrorKind::Parameter, "fit_minmax: no units");
    ScalerStats stats;
    stats.sensor_names = train.front().sensor_names;
    const auto s_count = stats.sensor_names.size();
    stats.min.assign(s_count, std::numeric_limits<double>::infinity());
    stats.max.assign(s_count, -std::numeric_limits<double>::infinity());
    for (const auto& u : train) {
        for (std::size_t s = 0; s < s_count; ++s) {
            const auto col = u.sensors.col(static_cast<Eigen::Index>(s));
            stats.min[s] = std::min(stats.min[s], col.minCoeff());
            stats.max[s] = std::max(stats.max[s], col.maxCoeff());
        }
    }
    for (std::size_t s = 0; s < s_count; ++s) {
        if (!(stats.max[s] > stats.min[s])) {
            throw Error(ErrorKind::Integrity, "sensor " + stats.sensor_names[s] +
                                                  " has zero range; filter_sensors should have removed it");
        }
    }
    return stats;
}

std::vector<UnitSeries> apply_minmax(const std::vector<UnitSeries>& units, const ScalerStats& stats) {
    std::vector<UnitSeries> out = units;
    for (auto& u : out) {
        if (u.sensor_names != stats.sensor_names) {
            throw Error(ErrorKind::Contract, "apply_minmax: sensor set differs from scaler");
        }
        for (Eigen::Index s = 0; s < u.sensors.cols(); ++s) {
            const double lo = stats.min[s];
            const double range = stats.max[s] - lo;
            for (Eigen::Index t = 0; t < u.sensors.rows(); ++t) {
                u.sensors(t, s) = std::clamp((u.sensors(t, s) - lo) / range, 0.0, 1.0);
            }
        }
    }
    return out;
}

NormalizeResult normalize_minmax(const std::vector<UnitSeries>& train, const std::vector<UnitSeries>& test) {
    auto stats = fit_minmax(train);
    return {apply_minmax(train, stats), apply_minmax(test, stats), stats};
}

std::vector<double> WindowInstance::one_hot(int mode_count) const {
    if (!mode || *mode < 0 || *mode >= mode_count) {
        throw Error(ErrorKind::Contract, "window has no failure-mode label in range");
    }
    std::vector<double> q(static_cast<std::size_t>(mode_count), 0.0);
    q[static_cast<std::size_t>(*mode)] = 1.0;
    return q;
}

WindowSet make_windows(const std::vector<UnitSeries>& units, const WindowOptions& options) {
    if (options.ntw < 1 || options.stride < 1) {
        throw Error(ErrorKind::Parameter, "make_windows: ntw and stride must be positive");
    }
    const int ntw = options.ntw;
    WindowSet set;
    for (const auto& u : units) {
        const int t_len = u.length();
        auto target_at = [&](int t) { return u.has_rul() ? static_cast<double>(u.rul[t - 1]) : 0.0; };
        if (t_len < ntw) {
            if (!options.pad_short || t_len == 0) {
                set.skipped_units.push_back(u.unit_id);
                continue;
            }
            WindowInstance w;
            w.unit_id = u.unit_id;
            w.end_cycle = t_len;
            w.padded_rows = ntw - t_len;
            w.x.resize(ntw, u.sensor_count());
            for (int r = 0; r < ntw; ++r) w.x.row(r) = u.sensors.row(std::max(0, r - w.padded_rows));
            w.rul_target = target_at(t_len);
            set.instances.push_back(std::move(w));
            continue;
        }
        for (int t = ntw; t <= t_len; t += options.stride) {
            WindowInstance w;
            w.unit_id = u.unit_id;
            w.end_cycle = t;
            w.x = u.sensors.middleRows(t - ntw, ntw);
            w.rul_target = target_at(t);
            set.instances.push_back(std::move(w));
        }
    }
    if (!set.skipped_units.empty()) {
        std::ostringstream ids;
        for (std::size_t i = 0; i < set.skipped_units.size(); ++i) ids << (i ? "," : "") << set.skipped_units[i];
        spdlog::warn("make_windows: {} unit(s) shorter than ntw={} skipped: {}", set.skipped_units.size(), ntw,
                     ids.str());
    }
    return set;
}

std::size_t expected_window_count(const std::vector<UnitSeries>& units, int ntw, int stride) {
    std::size_t total = 0;
    for (const auto& u : units) {
        const int t_len = u.length();
        if (t_len >= ntw) total += static_cast<std::size_t>((t_len - ntw) / stride + 1);
    }
    return total;
}

}  // namespace fmprog::dataset
