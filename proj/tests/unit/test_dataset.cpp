#include "fmprog/csv.hpp"
#include "fmprog/dataset/cmapss.hpp"
#include "fmprog/dataset/preprocess.hpp"
#include "fmprog/dataset/store.hpp"
#include "fmprog/error.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>

using namespace fmprog;
using namespace fmprog::dataset;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::Contract;
}

// One-sensor units with explicit values; sensor names s1, s2, ...
UnitSeries unit_from(int id, const std::vector<std::vector<double>>& rows) {
    UnitSeries u;
    u.unit_id = id;
    const auto cols = static_cast<Eigen::Index>(rows.front().size());
    for (Eigen::Index c = 0; c < cols; ++c) u.sensor_names.push_back("s" + std::to_string(c + 1));
    u.sensors.resize(static_cast<Eigen::Index>(rows.size()), cols);
    u.op_settings = RowMatrix::Zero(static_cast<Eigen::Index>(rows.size()), 3);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) u.sensors(static_cast<Eigen::Index>(r), c) = rows[r][c];
        u.rul.push_back(static_cast<int>(rows.size() - 1 - r));
    }
    return u;
}

UnitSeries ramp_unit(int id, int length, int sensors = 2) {
    std::vector<std::vector<double>> rows;
    for (int t = 0; t < length; ++t) {
        std::vector<double> row;
        for (int s = 0; s < sensors; ++s) row.push_back(t + 100.0 * s);
        rows.push_back(row);
    }
    return unit_from(id, rows);
}

}  // namespace

TEST(Cmapss, ParsesRowsAndLabelsTrainingRul) {
    std::stringstream in;
    for (int t = 1; t <= 192; ++t) {
        in << "3 " << t << " 0.0 0.0 100.0";
        for (int s = 0; s < kSensorCount; ++s) in << ' ' << 500 + s + 0.001 * t;
        in << '\n';
    }
    auto units = group_units(parse_records(in));
    ASSERT_EQ(units.size(), 1u);
    label_rul(units, Split::Train, nullptr);
    EXPECT_EQ(units[0].unit_id, 3);
    EXPECT_EQ(units[0].length(), 192);
    EXPECT_EQ(units[0].rul.front(), 191);
    EXPECT_EQ(units[0].rul.back(), 0);
    for (std::size_t t = 1; t < units[0].rul.size(); ++t) EXPECT_EQ(units[0].rul[t], units[0].rul[t - 1] - 1);
    EXPECT_EQ(units[0].sensor_names.front(), "T2");
    EXPECT_EQ(units[0].sensor_names.back(), "W32");
}

TEST(Cmapss, TestRulAddsTruthToRemainingCycles) {
    fixtures::FleetSpec spec;
    spec.units = 3;
    const auto fleet = fixtures::make_fleet(spec);
    const auto dir = fixtures::scratch_dir("cmapss_test_rul");
    fixtures::write_fleet(dir, "FD009", fleet);
    const auto files = cmapss_files(dir, "FD009");
    const auto test = load_cmapss(files.test, Split::Test, files.rul);
    ASSERT_EQ(test.size(), 3u);
    for (std::size_t i = 0; i < test.size(); ++i) {
        EXPECT_EQ(test[i].rul.back(), fleet.truth[i]);
        EXPECT_EQ(test[i].rul.front(), fleet.truth[i] + test[i].length() - 1);
    }
    EXPECT_FALSE(load_cmapss(files.test, Split::Test).front().has_rul());
}

TEST(Cmapss, WrongColumnCountIsParseErrorWithLine) {
    std::stringstream in("1 1 0 0 100 1 2 3\n");
    try {
        parse_records(in);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Parse);
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    }
}

TEST(Cmapss, CycleGapIsIntegrityError) {
    std::vector<RawRecord> recs(2);
    recs[0].unit_id = recs[1].unit_id = 1;
    recs[0].cycle = 1;
    recs[1].cycle = 3;
    EXPECT_EQ(kind_of([&] { group_units(recs); }), ErrorKind::Integrity);
    recs[1].cycle = 2;
    recs[0].cycle = 0;
    EXPECT_EQ(kind_of([&] { group_units(recs); }), ErrorKind::Integrity);
}

TEST(Cmapss, RoundTripKeepsFullPrecision) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1e3);
    std::vector<RawRecord> recs;
    for (int u = 1; u <= 3; ++u) {
        for (int t = 1; t <= 17; ++t) {
            RawRecord r;
            r.unit_id = u;
            r.cycle = t;
            for (auto& v : r.op_settings) v = g(rng);
            for (auto& v : r.sensors) v = g(rng) * 1e-7;
            recs.push_back(r);
        }
    }
    recs[5].sensors[4] = std::numeric_limits<double>::quiet_NaN();
    std::stringstream buf;
    write_records(buf, recs);
    const auto back = parse_records(buf);
    ASSERT_EQ(back.size(), recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(back[i].unit_id, recs[i].unit_id);
        EXPECT_EQ(back[i].cycle, recs[i].cycle);
        EXPECT_EQ(back[i].op_settings, recs[i].op_settings);
        for (int s = 0; s < kSensorCount; ++s) {
            const double a = recs[i].sensors[s], b = back[i].sensors[s];
            if (std::isnan(a)) {
                EXPECT_TRUE(std::isnan(b));
            } else {
                EXPECT_EQ(a, b);
            }
        }
    }
}

TEST(Cmapss, WorkingConditionsFromRoundedSettings) {
    fixtures::FleetSpec spec;
    spec.units = 4;
    spec.conditions = 6;
    const auto units = group_units(fixtures::make_fleet(spec).train);
    const auto ids = working_condition_ids(units);
    const int distinct = *std::max_element(ids.begin(), ids.end()) + 1;
    EXPECT_EQ(distinct, 6);
}

TEST(Filter, DropsConstantLowStdAndMostlyMissing) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<double>> rows;
    for (int t = 0; t < 10; ++t) {
        // s1 constant, s2 std ~0.005, s3 informative, s4 60% missing
        rows.push_back({5.0, 1.0 + (t % 2 ? 0.005 : -0.005), static_cast<double>(t), t < 6 ? nan : static_cast<double>(t)});
    }
    const auto result = filter_sensors({unit_from(1, rows)});
    ASSERT_EQ(result.report.dropped.size(), 3u);
    EXPECT_EQ(result.report.dropped[0].name, "s1");
    EXPECT_EQ(result.report.dropped[0].reason, DropReason::SingleValue);
    EXPECT_EQ(result.report.dropped[1].reason, DropReason::LowStd);
    EXPECT_EQ(result.report.dropped[2].reason, DropReason::MostlyMissing);
    EXPECT_EQ(result.report.retained, std::vector<std::string>{"s3"});
    EXPECT_EQ(result.units[0].sensor_count(), 1);
}

TEST(Filter, ReportPartitionsSensorSet) {
    fixtures::FleetSpec spec;
    spec.units = 5;
    const auto units = group_units(fixtures::make_fleet(spec).train);
    const auto r = filter_sensors(units).report;
    std::set<std::string> all;
    for (const auto& d : r.dropped) EXPECT_TRUE(all.insert(d.name).second);
    for (const auto& n : r.retained) EXPECT_TRUE(all.insert(n).second);
    EXPECT_EQ(all.size(), static_cast<std::size_t>(kSensorCount));
    EXPECT_EQ(r.dropped.size(), 6u);
}

TEST(Filter, AllDroppedIsConfigError) {
    EXPECT_EQ(kind_of([] { filter_sensors({unit_from(1, {{1.0}, {1.0}})}); }), ErrorKind::Config);
}

TEST(Normalize, ScalesTrainAndClampsTest) {
    const auto train = unit_from(1, {{0.0}, {5.0}, {10.0}});
    const auto test = unit_from(2, {{12.0}, {5.0}, {-3.0}});
    const auto n = normalize_minmax({train}, {test});
    EXPECT_EQ(n.train[0].sensors(0, 0), 0.0);
    EXPECT_EQ(n.train[0].sensors(1, 0), 0.5);
    EXPECT_EQ(n.train[0].sensors(2, 0), 1.0);
    EXPECT_EQ(n.test[0].sensors(0, 0), 1.0);
    EXPECT_EQ(n.test[0].sensors(1, 0), 0.5);
    EXPECT_EQ(n.test[0].sensors(2, 0), 0.0);
}

TEST(Normalize, IdempotentOnOwnStatistics) {
    std::mt19937_64 rng(11);
    std::vector<UnitSeries> units;
    for (int u = 1; u <= 4; ++u) {
        UnitSeries s = ramp_unit(u, 20, 3);
        s.sensors = fixtures::random_matrix(20, 3, rng, -4.0, 9.0);
        units.push_back(s);
    }
    const auto once = normalize_minmax(units, {}).train;
    const auto twice = apply_minmax(once, fit_minmax(once));
    for (std::size_t u = 0; u < once.size(); ++u) EXPECT_EQ(once[u].sensors, twice[u].sensors);
}

TEST(Normalize, ConstantRetainedSensorIsIntegrityError) {
    EXPECT_EQ(kind_of([] { fit_minmax({unit_from(1, {{2.0}, {2.0}})}); }), ErrorKind::Integrity);
}

TEST(Windows, CountsAndRowOrder) {
    const auto u = ramp_unit(1, 100);
    const auto set = make_windows({u}, {60, 1, false});
    EXPECT_EQ(set.instances.size(), 41u);
    const auto& w = set.instances.front();
    EXPECT_EQ(w.end_cycle, 60);
    EXPECT_EQ(w.x(0, 0), 0.0);
    EXPECT_EQ(w.x(59, 0), 59.0);
    EXPECT_EQ(w.rul_target, 40.0);
    EXPECT_EQ(set.instances.back().end_cycle, 100);
    EXPECT_EQ(set.instances.back().rul_target, 0.0);
    EXPECT_EQ(make_windows({ramp_unit(1, 60)}, {60, 1, false}).instances.size(), 1u);
}

TEST(Windows, ShortUnitsSkippedOrPadded) {
    const auto u = ramp_unit(7, 38);
    const auto skipped = make_windows({u}, {60, 1, false});
    EXPECT_TRUE(skipped.instances.empty());
    EXPECT_EQ(skipped.skipped_units, std::vector<int>{7});
    const auto padded = make_windows({u}, {60, 1, true});
    ASSERT_EQ(padded.instances.size(), 1u);
    const auto& w = padded.instances[0];
    EXPECT_EQ(w.padded_rows, 22);
    EXPECT_EQ(w.end_cycle, 38);
    for (int r = 0; r < 23; ++r) EXPECT_EQ(w.x(r, 0), 0.0);
    EXPECT_EQ(w.x(23, 0), 1.0);
    EXPECT_EQ(w.x(59, 0), 37.0);
}

TEST(Windows, CountMatchesClosedFormOverRandomShapes) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> len(1, 80), ntw(1, 40), stride(1, 7), count(1, 6);
        std::vector<UnitSeries> units;
        const int n = count(rng);
        for (int u = 1; u <= n; ++u) units.push_back(ramp_unit(u, len(rng), 1));
        const int w = ntw(rng), s = stride(rng);
        const auto set = make_windows(units, {w, s, false});
        std::size_t expected = 0;
        for (const auto& u : units) expected += u.length() >= w ? static_cast<std::size_t>((u.length() - w) / s + 1) : 0;
        EXPECT_EQ(set.instances.size(), expected);
        EXPECT_EQ(expected_window_count(units, w, s), expected);
        for (const auto& inst : set.instances) EXPECT_EQ((inst.end_cycle - w) % s, 0);
    }
}

TEST(Windows, OneHotAndBadArguments) {
    WindowInstance w;
    w.mode = 1;
    EXPECT_EQ(w.one_hot(3), (std::vector<double>{0.0, 1.0, 0.0}));
    EXPECT_EQ(kind_of([] { make_windows({ramp_unit(1, 5)}, {0, 1, false}); }), ErrorKind::Parameter);
}

TEST(Store, DatasetRoundTrip) {
    fixtures::FleetSpec spec;
    spec.units = 4;
    const auto fleet = fixtures::make_fleet(spec);
    auto train = group_units(fleet.train);
    auto test = group_units(fleet.test);
    label_rul(train, Split::Train, nullptr);
    label_rul(test, Split::Test, &fleet.truth);
    const auto filtered = filter_sensors(train);
    auto norm = normalize_minmax(filtered.units, select_sensors(test, filtered.report));
    PreparedDataset data{"FD003", norm.train, norm.test, filtered.report, norm.stats, {30, 1, false}, {30, 1, true}};
    const auto dir = fixtures::scratch_dir("store");
    save_dataset(dir, data);
    for (const auto& f : dataset_files()) EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    const auto back = load_dataset(dir);
    EXPECT_EQ(back.dataset_id, "FD003");
    ASSERT_EQ(back.train.size(), data.train.size());
    for (std::size_t u = 0; u < data.train.size(); ++u) {
        EXPECT_EQ(back.train[u].sensors, data.train[u].sensors);
        EXPECT_EQ(back.train[u].rul, data.train[u].rul);
        EXPECT_EQ(back.train[u].sensor_names, data.train[u].sensor_names);
    }
    EXPECT_EQ(back.test.back().rul, data.test.back().rul);
    EXPECT_EQ(back.scaler.max, data.scaler.max);
    EXPECT_EQ(back.filter_report.retained, data.filter_report.retained);
    EXPECT_EQ(back.test_windows.pad_short, true);
    EXPECT_EQ(back.train_windows.ntw, 30);
}

TEST(Store, MissingManifestIsMissingArtifact) {
    EXPECT_EQ(kind_of([] { load_dataset(fixtures::scratch_dir("store_empty")); }), ErrorKind::MissingArtifact);
}

TEST(Csv, FormatRoundTripsDoubles) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> e(-300.0, 300.0);
    for (int i = 0; i < 1000; ++i) {
        const double v = std::pow(10.0, e(rng)) * (i % 2 ? -1.0 : 1.0);
        EXPECT_EQ(csv::parse_double(csv::format(v)), v);
    }
    EXPECT_EQ(csv::format(0.5), "0.5");
    EXPECT_EQ(kind_of([] { csv::parse_double("abc"); }), ErrorKind::Parse);
    EXPECT_EQ(kind_of([] { csv::parse_int("1.5"); }), ErrorKind::Parse);
}
