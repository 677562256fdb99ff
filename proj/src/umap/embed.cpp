#include "fmprog/umap/embed.hpp"

#include "fmprog/csv.hpp"
#include "fmprog/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <numeric>

namespace fmprog::umap {

NeighborGraph build_graph(const RowMatrix& points, const UmapConfig& config) {
    NeighborGraph g;
    g.neighbors = knn_graph(points, config.n_neighbors, config.knn, config.seed);
    g.smooth = smooth_knn(g.neighbors);
    if (!g.smooth.floored.empty()) {
        spdlog::warn("smooth_knn: sigma floor applied to {} point(s)", g.smooth.floored.size());
    }
    g.directed = fuzzy_weights(g.neighbors, g.smooth.rho, g.smooth.sigma);
    g.adjacency = symmetrize(g.directed);
    return g;
}

Embedding embed(const RowMatrix& rows, const std::vector<RowKey>& keys, const UmapConfig& config) {
    const auto n = static_cast<std::size_t>(rows.rows());
    if (keys.size() != n) throw Error(ErrorKind::Contract, "embed: one key per row required");
    if (config.n_components < 1) throw Error(ErrorKind::Parameter, "embed: n_components must be positive");
    if (!rows.allFinite()) throw Error(ErrorKind::Integrity, "embed: input contains non-finite values");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    for (std::size_t r = 1; r < n; ++r) {
        if (keys[order[r]] == keys[order[r - 1]]) {
            throw Error(ErrorKind::Integrity, "embed: duplicate row key (unit " + std::to_string(keys[order[r]].unit_id) +
                                                  ", cycle " + std::to_string(keys[order[r]].cycle) + ")");
        }
    }
    RowMatrix canonical(rows.rows(), rows.cols());
    for (std::size_t r = 0; r < n; ++r) canonical.row(static_cast<Eigen::Index>(r)) = rows.row(static_cast<Eigen::Index>(order[r]));

    const auto graph = build_graph(canonical, config);

    Embedding out;
    out.keys = keys;
    out.sigma_floor_count = graph.smooth.floored.size();
    auto& model = out.model;
    model.min_dist = config.min_dist;
    model.curve = fit_ab(config.min_dist);
    model.optimizer = LayoutOptions{model.curve.alpha, model.curve.beta, config.epochs, config.learning_rate,
                                    config.negative_sample_rate, config.seed};

    RowMatrix y = spectral_init(graph.adjacency, config.n_components, config.seed, &model.init);
    model.stats = config.parallel_layout ? optimize_layout_parallel(graph.adjacency, y, model.optimizer)
                                         : optimize_layout(graph.adjacency, y, model.optimizer);

    model.points.resize(rows.rows(), config.n_components);
    for (std::size_t r = 0; r < n; ++r) model.points.row(static_cast<Eigen::Index>(order[r])) = y.row(static_cast<Eigen::Index>(r));
    return out;
}

Embedding embed_units(const std::vector<dataset::UnitSeries>& units, const UmapConfig& config) {
    if (units.empty()) throw Error(ErrorKind::Parameter, "embed_units: no units");
    Eigen::Index total = 0;
    for (const auto& u : units) total += u.length();
    const auto s = units.front().sensor_count();
    RowMatrix rows(total, s);
    std::vector<RowKey> keys;
    std::vector<double> rul;
    keys.reserve(static_cast<std::size_t>(total));
    Eigen::Index r = 0;
    const bool labeled = std::all_of(units.begin(), units.end(), [](const auto& u) { return u.has_rul(); });
    for (const auto& u : units) {
        if (u.sensor_count() != s) throw Error(ErrorKind::Contract, "embed_units: units disagree on sensor count");
        rows.middleRows(r, u.length()) = u.sensors;
        for (int t = 0; t < u.length(); ++t) {
            keys.push_back({u.unit_id, t + 1});
            if (labeled) rul.push_back(u.rul[static_cast<std::size_t>(t)]);
        }
        r += u.length();
    }
    auto out = embed(rows, keys, config);
    out.rul = std::move(rul);
    return out;
}

void write_embedding_csv(const std::filesystem::path& file, const Embedding& embedding) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + file.string());
    out << "unit_id,cycle,rul";
    for (int d = 0; d < embedding.dim(); ++d) out << ",y_" << (d + 1);
    out << '\n';
    for (std::size_t i = 0; i < embedding.size(); ++i) {
        out << embedding.keys[i].unit_id << ',' << embedding.keys[i].cycle << ',';
        if (!embedding.rul.empty()) out << csv::format(embedding.rul[i]);
        for (int d = 0; d < embedding.dim(); ++d) {
            out << ',' << csv::format(embedding.model.points(static_cast<Eigen::Index>(i), d));
        }
        out << '\n';
    }
}

Embedding read_embedding_csv(const std::filesystem::path& file) {
    auto table = csv::read(file);
    if (table.header.size() < 4) throw Error(ErrorKind::Parse, file.string() + ": embedding needs y_1..y_D columns");
    const auto dim = static_cast<Eigen::Index>(table.header.size() - 3);
    Embedding e;
    e.model.points.resize(static_cast<Eigen::Index>(table.rows.size()), dim);
    bool labeled = true;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        e.keys.push_back({csv::parse_int(row[0]), csv::parse_int(row[1])});
        if (row[2].empty()) {
            labeled = false;
        } else {
            e.rul.push_back(csv::parse_double(row[2]));
        }
        for (Eigen::Index d = 0; d < dim; ++d) {
            e.model.points(static_cast<Eigen::Index>(i), d) = csv::parse_double(row[3 + static_cast<std::size_t>(d)]);
        }
    }
    if (!labeled) e.rul.clear();
    return e;
}

}  // namespace fmprog::umap
