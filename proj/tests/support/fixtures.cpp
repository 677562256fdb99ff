#include "fixtures.hpp"

#include <array>
#include <cmath>
#include <fstream>

namespace fmprog::fixtures {

namespace {

// Operating regimes resembling the six C-MAPSS conditions.
constexpr std::array<std::array<double, 3>, 6> kRegimes = {{
    {0.0, 0.0, 100.0},
    {10.0, 0.25, 100.0},
    {20.0, 0.70, 100.0},
    {25.0, 0.62, 60.0},
    {35.0, 0.84, 100.0},
    {42.0, 0.84, 100.0},
}};

// Sensors that never move (dropped by the filter), as in the single-condition sub-datasets.
constexpr std::array<int, 6> kFlat = {0, 4, 9, 15, 17, 18};

bool is_flat(int s) {
    for (int f : kFlat) {
        if (f == s) return true;
    }
    return false;
}

std::vector<dataset::RawRecord> make_unit(int unit_id, int life, int cut, int mode, const FleetSpec& spec,
                                          std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, spec.noise);
    std::uniform_int_distribution<int> regime(0, spec.conditions - 1);
    std::vector<dataset::RawRecord> out;
    for (int t = 1; t <= cut; ++t) {
        dataset::RawRecord r;
        r.unit_id = unit_id;
        r.cycle = t;
        const int c = spec.conditions > 1 ? regime(rng) : 0;
        r.op_settings = kRegimes[static_cast<std::size_t>(c)];
        const double wear = std::pow(static_cast<double>(t) / life, 2.0);
        for (int s = 0; s < dataset::kSensorCount; ++s) {
            double v = 1.0 + 0.1 * s;
            if (is_flat(s)) {
                r.sensors[static_cast<std::size_t>(s)] = v;
                continue;
            }
            v += 0.5 * c * (1.0 + 0.05 * s);  // regime shift dominates when several regimes exist
            // Each mode drives its own half of the informative sensors.
            const bool driven = (s % 2 == mode % 2) || spec.modes == 1;
            v += (driven ? 0.3 : 0.03) * wear * (s % 3 == 0 ? -1.0 : 1.0);
            r.sensors[static_cast<std::size_t>(s)] = v + noise(rng);
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace

Fleet make_fleet(const FleetSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> life(spec.min_life, spec.max_life);
    std::uniform_real_distribution<double> frac(0.5, 0.9);
    Fleet fleet;
    for (int u = 1; u <= spec.units; ++u) {
        const int mode = (u - 1) % spec.modes;
        const int t = life(rng);
        auto rows = make_unit(u, t, t, mode, spec, rng);
        fleet.train.insert(fleet.train.end(), rows.begin(), rows.end());
        fleet.train_modes.push_back(mode);
    }
    for (int u = 1; u <= spec.units; ++u) {
        const int mode = (u - 1) % spec.modes;
        const int t = life(rng);
        const int cut = std::max(spec.min_life / 2, static_cast<int>(t * frac(rng)));
        auto rows = make_unit(u, t, cut, mode, spec, rng);
        fleet.test.insert(fleet.test.end(), rows.begin(), rows.end());
        fleet.truth.push_back(t - cut);
    }
    return fleet;
}

void write_fleet(const std::filesystem::path& root, const std::string& dataset_id, const Fleet& fleet) {
    std::filesystem::create_directories(root);
    const auto files = dataset::cmapss_files(root, dataset_id);
    {
        std::ofstream out(files.train);
        dataset::write_records(out, fleet.train);
    }
    {
        std::ofstream out(files.test);
        dataset::write_records(out, fleet.test);
    }
    std::ofstream out(files.rul);
    for (int r : fleet.truth) out << r << '\n';
}

std::vector<dataset::WindowInstance> ramp_instances(int units, int life, int window, std::uint64_t seed,
                                                   double noise_sd) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sd);
    std::vector<dataset::WindowInstance> out;
    for (int u = 1; u <= units; ++u) {
        const int mode = (u - 1) % 2;
        RowMatrix series(life, 2);
        for (int t = 0; t < life; ++t) {
            const double progress = static_cast<double>(t + 1) / life;
            series(t, 0) = (mode == 0 ? progress : 1.0 - progress) + noise(rng);
            series(t, 1) = (mode == 0 ? 0.2 : 0.8) + noise(rng);
        }
        for (int end = window; end <= life; ++end) {
            dataset::WindowInstance w;
            w.unit_id = u;
            w.end_cycle = end;
            w.x = series.middleRows(end - window, window);
            w.rul_target = life - end;
            w.mode = mode;
            out.push_back(std::move(w));
        }
    }
    return out;
}

RowMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    RowMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
    }
    return m;
}

trajectory::Trajectory path1d(int unit_id, const std::vector<double>& values) {
    trajectory::Trajectory t;
    t.unit_id = unit_id;
    t.points = Eigen::Map<const RowMatrix>(values.data(), static_cast<Eigen::Index>(values.size()), 1);
    return t;
}

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("fmprog_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fmprog::fixtures
