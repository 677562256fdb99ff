#include "fmprog/pipeline/stages.hpp"

#include "fmprog/csv.hpp"
#include "fmprog/dataset/store.hpp"
#include "fmprog/error.hpp"
#include "fmprog/eval/metrics.hpp"
#include "fmprog/joint/train.hpp"
#include "fmprog/trajectory/clustering.hpp"
#include "fmprog/umap/embed.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#ifndef FMPROG_VERSION
#define FMPROG_VERSION "0.0.0"
#endif

namespace fmprog::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDatasetDir = "dataset";
constexpr const char* kEmbedding = "embed/embedding.csv";
constexpr const char* kUmapModel = "embed/umap_model.json";
constexpr const char* kLabels = "cluster/labels.csv";
constexpr const char* kDiagnostics = "cluster/diagnostics.json";
constexpr const char* kCheckpoint = "train/checkpoint.json";
constexpr const char* kCvLog = "train/cv_log.json";
constexpr const char* kMetrics = "evaluate/metrics.json";
constexpr const char* kIntervals = "evaluate/intervals.csv";
constexpr const char* kPredictions = "evaluate/predictions.csv";
constexpr const char* kSummaryCsv = "reproduce/summary.csv";
constexpr const char* kSummaryJson = "reproduce/summary.json";

json real_json(double v) { return std::isinf(v) ? json("inf") : json(v); }

void write_json(const fs::path& file, const json& j) {
    fs::create_directories(file.parent_path());
    const auto tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw Error(ErrorKind::Config, "cannot write " + tmp);
        out << j.dump(2) << '\n';
    }
    fs::rename(tmp, file);
}

json read_json(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::MissingArtifact, "cannot read " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, file.string() + ": " + e.what());
    }
}

json block_json(Stage stage, const RunConfig& c) {
    switch (stage) {
    case Stage::Preprocess: return {{"dataset", c.dataset.id}, {"preprocess", to_json(c.preprocess)}};
    case Stage::Embed: return to_json(c.umap);
    case Stage::Cluster: return to_json(c.cluster);
    case Stage::Train: return to_json(c.train);
    case Stage::Evaluate: return {{"interval", 50}};
    case Stage::Reproduce: return {{"reproduce", to_json(c.reproduce)}, {"train", to_json(c.train)}};
    }
    return {};
}

std::vector<Stage> transitive_upstream(Stage stage) {
    std::vector<Stage> out;
    std::vector<Stage> todo = upstream_of(stage);
    while (!todo.empty()) {
        const Stage s = todo.back();
        todo.pop_back();
        if (std::find(out.begin(), out.end(), s) != out.end()) continue;
        out.push_back(s);
        for (Stage u : upstream_of(s)) todo.push_back(u);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Upstream stages must exist, be intact and have run with the blocks now configured.
void check_upstream(Stage stage, const RunManifest& manifest, const RunConfig& config) {
    manifest.require(stage);
    for (Stage up : transitive_upstream(stage)) {
        const auto* r = manifest.find(up);
        if (!r) {
            throw Error(ErrorKind::MissingArtifact, std::string(to_string(stage)) + " needs the " + to_string(up) +
                                                        " stage: run `fmprog " + to_string(up) + "` first");
        }
        if (r->summary.value("config_key", "") != config_key(up, config)) {
            throw Error(ErrorKind::MissingArtifact, std::string("the ") + to_string(up) +
                                                        " configuration changed since it last ran: run `fmprog " +
                                                        to_string(up) + "` again first");
        }
    }
}

std::string stage_key(Stage stage, const RunConfig& config, const RunManifest& manifest, const std::string& extra) {
    std::string material = config_key(stage, config) + extra;
    for (Stage up : upstream_of(stage)) material += manifest.find(up)->key;
    return sha256_hex(material);
}

struct Produced {
    std::vector<fs::path> outputs;
    json summary = json::object();
};

// ---- preprocess --------------------------------------------------------------------------------------------

std::string raw_data_hash(const RunConfig& config) {
    const auto files = dataset::cmapss_files(config.dataset_root(), config.dataset.id);
    std::string material;
    for (const auto& f : {files.train, files.test, files.rul}) {
        if (!fs::exists(f)) throw Error(ErrorKind::Config, "dataset file not found: " + f.string());
        material += f.filename().string() + ":" + sha256_file(f) + ";";
    }
    return sha256_hex(material);
}

Produced run_preprocess(const RunContext& ctx) {
    const auto& c = ctx.config;
    const auto files = dataset::cmapss_files(c.dataset_root(), c.dataset.id);
    auto train = dataset::load_cmapss(files.train, dataset::Split::Train);
    auto test = dataset::load_cmapss(files.test, dataset::Split::Test, files.rul);
    const auto filtered = dataset::filter_sensors(train, {c.preprocess.min_std, c.preprocess.max_missing});
    for (const auto& d : filtered.report.dropped) {
        spdlog::info("preprocess: dropped sensor {} ({})", d.name, dataset::to_string(d.reason));
    }
    auto norm = dataset::normalize_minmax(filtered.units, dataset::select_sensors(test, filtered.report));

    dataset::PreparedDataset data;
    data.dataset_id = c.dataset.id;
    data.train = std::move(norm.train);
    data.test = std::move(norm.test);
    data.filter_report = filtered.report;
    data.scaler = std::move(norm.stats);
    data.train_windows = {c.preprocess.ntw, c.preprocess.stride, false};
    data.test_windows = {c.preprocess.ntw, c.preprocess.stride, c.preprocess.pad_short};
    const auto dir = ctx.run_dir / kDatasetDir;
    dataset::save_dataset(dir, data);

    Produced p;
    for (const auto& f : dataset::dataset_files()) p.outputs.push_back(fs::path(kDatasetDir) / f);
    p.summary["train_units"] = data.train.size();
    p.summary["test_units"] = data.test.size();
    p.summary["retained_sensors"] = data.filter_report.retained;
    p.summary["train_windows"] = dataset::expected_window_count(data.train, c.preprocess.ntw, c.preprocess.stride);
    return p;
}

// ---- embed -------------------------------------------------------------------------------------------------

Produced run_embed(const RunContext& ctx) {
    const auto data = dataset::load_dataset(ctx.run_dir / kDatasetDir);
    const auto emb = umap::embed_units(data.train, ctx.config.umap);
    fs::create_directories(ctx.run_dir / "embed");
    umap::write_embedding_csv(ctx.run_dir / kEmbedding, emb);
    const auto& m = emb.model;
    json model = {{"config", to_json(ctx.config.umap)},
                  {"points", emb.size()},
                  {"dim", emb.dim()},
                  {"alpha", m.curve.alpha},
                  {"beta", m.curve.beta},
                  {"curve_max_residual", m.curve.max_residual},
                  {"curve_converged", m.curve.converged},
                  {"min_dist", m.min_dist},
                  {"sigma_floor_count", emb.sigma_floor_count},
                  {"edges", m.stats.edges},
                  {"attractive_updates", m.stats.attractive_updates},
                  {"repulsive_updates", m.stats.repulsive_updates}};
    write_json(ctx.run_dir / kUmapModel, model);
    Produced p;
    p.outputs = {kEmbedding, kUmapModel};
    p.summary["points"] = emb.size();
    p.summary["sigma_floor_count"] = emb.sigma_floor_count;
    return p;
}

// ---- cluster -----------------------------------------------------------------------------------------------

Produced run_cluster(const RunContext& ctx) {
    const auto& cc = ctx.config.cluster;
    const auto emb = umap::read_embedding_csv(ctx.run_dir / kEmbedding);
    const auto trajectories = trajectory::build_trajectories(emb);
    trajectory::KMeansOptions opt{cc.modes, cc.restarts, cc.max_iterations, cc.tolerance, cc.seed};

    json diag = json::object();
    if (cc.modes == 0) {
        const int max_modes = std::min<int>(cc.max_modes, static_cast<int>(trajectories.size()) - 1);
        const auto choice = trajectory::choose_mode_count(trajectories, opt, std::max(max_modes, 2), cc.elbow_threshold);
        opt.n_clusters = choice.n_clusters;
        json sil = json::array();
        for (const auto& s : choice.silhouette) sil.push_back(s ? json(*s) : json(nullptr));
        diag["mode_count"] = {{"chosen", choice.n_clusters},
                              {"inertia", choice.inertia},
                              {"silhouette", sil},
                              {"best_silhouette_clusters", choice.best_silhouette_clusters},
                              {"elbow_drop", choice.elbow_drop},
                              {"elbow_threshold", cc.elbow_threshold}};
        spdlog::info("cluster: {} failure mode(s) chosen (elbow drop {:.3f})", choice.n_clusters, choice.elbow_drop);
    }
    const auto result = trajectory::dtw_kmeans(trajectories, opt);
    const auto d = trajectory::dtw_matrix(trajectories);
    const auto quality = eval::clustering_diagnostics(result.labels, d);

    fs::create_directories(ctx.run_dir / "cluster");
    trajectory::write_labels_csv(ctx.run_dir / kLabels, result);
    const auto centroids = trajectory::write_centroid_csvs(ctx.run_dir / "cluster", trajectories, result);

    std::vector<int> sizes(static_cast<std::size_t>(result.n_clusters), 0);
    for (int l : result.labels) ++sizes[static_cast<std::size_t>(l)];
    json restarts = json::array();
    for (const auto& r : result.restarts) {
        restarts.push_back({{"seed", r.seed},
                            {"iterations", r.iterations},
                            {"converged", r.converged},
                            {"inertia", r.inertia},
                            {"reseeded_clusters", r.reseeded_clusters}});
    }
    diag["n_clusters"] = result.n_clusters;
    diag["cluster_sizes"] = sizes;
    diag["inertia"] = result.inertia;
    diag["silhouette"] = quality.silhouette ? json(*quality.silhouette) : json(nullptr);
    diag["best_restart"] = result.best_restart;
    diag["restarts"] = restarts;
    write_json(ctx.run_dir / kDiagnostics, diag);

    Produced p;
    p.outputs = {kLabels, kDiagnostics};
    for (const auto& c : centroids) p.outputs.push_back(fs::relative(c, ctx.run_dir));
    p.summary["modes"] = result.n_clusters;
    p.summary["cluster_sizes"] = sizes;
    p.summary["silhouette"] = diag["silhouette"];
    return p;
}

// ---- train / reproduce helpers -----------------------------------------------------------------------------

struct TrainingData {
    dataset::PreparedDataset data;
    std::vector<dataset::WindowInstance> train;
    std::vector<dataset::WindowInstance> test;
    std::map<int, int> modes;  // unit id -> 0-based mode
    int mode_count = 1;
};

TrainingData load_training_data(const fs::path& run_dir) {
    TrainingData t;
    t.data = dataset::load_dataset(run_dir / kDatasetDir);
    for (const auto& [unit, label] : trajectory::read_labels_csv(run_dir / kLabels)) {
        t.modes[unit] = label;
        t.mode_count = std::max(t.mode_count, label + 1);
    }
    t.train = dataset::make_windows(t.data.train, t.data.train_windows).instances;
    for (auto& w : t.train) {
        const auto it = t.modes.find(w.unit_id);
        if (it == t.modes.end()) {
            throw Error(ErrorKind::Integrity, "training unit " + std::to_string(w.unit_id) + " has no cluster label");
        }
        w.mode = it->second;
    }
    t.test = dataset::make_windows(t.data.test, t.data.test_windows).instances;
    if (t.train.empty()) throw Error(ErrorKind::Config, "no training windows: every unit is shorter than ntw");
    return t;
}

joint::Architecture base_architecture(const TrainingData& t) {
    joint::Architecture arch;
    arch.window = t.data.train_windows.ntw;
    arch.features = static_cast<int>(t.data.filter_report.retained.size());
    arch.modes = t.mode_count;
    return arch;
}

joint::TrainConfig train_config(const RunConfig& c) {
    auto tc = c.train.config;
    tc.loss.stride = c.preprocess.stride;
    return tc;
}

json report_json(const std::optional<eval::MetricReport>& r) { return r ? eval::to_json(*r) : json(nullptr); }

eval::MetricReport report_from_json(const json& j) {
    eval::MetricReport r;
    r.rmse = j.at("rmse");
    r.mae = j.at("mae");
    r.mape = j.at("mape");
    r.mr = j.at("mr");
    return r;
}

json cv_json(const joint::CrossValidation& cv) {
    json folds = json::array();
    for (const auto& f : cv.folds) {
        folds.push_back({{"fold", f.fold},
                         {"validation_units", f.validation_units},
                         {"report", eval::to_json(f.report)},
                         {"test", report_json(f.test)},
                         {"epochs", f.log.size()},
                         {"final_loss", f.log.empty() ? json(nullptr) : json(f.log.back().loss)},
                         {"diverged", f.diverged}});
    }
    return {{"hidden", {cv.arch.hidden1, cv.arch.hidden2}},
            {"parameters", cv.arch.parameter_count()},
            {"summary", eval::to_json(cv.summary)},
            {"test_summary", report_json(cv.test_summary)},
            {"folds", folds}};
}

/// Sizes for a single fixed-architecture run: the configured pair, else the first admissible grid entry,
/// else the smallest.
joint::HiddenSizes fixed_hidden(const RunConfig& c, joint::Architecture arch, std::size_t instances) {
    if (c.train.hidden.size() == 1) return c.train.hidden.front();
    for (const auto& h : c.train.hidden) {
        arch.hidden1 = h.first;
        arch.hidden2 = h.second;
        if (joint::admissible(arch, instances)) return h;
    }
    return *std::min_element(c.train.hidden.begin(), c.train.hidden.end(), [](const auto& a, const auto& b) {
        return a.first + a.second < b.first + b.second;
    });
}

// ---- train -------------------------------------------------------------------------------------------------

Produced run_train(const RunContext& ctx, const RunManifest& manifest) {
    const auto& c = ctx.config;
    const auto t = load_training_data(ctx.run_dir);
    auto arch = base_architecture(t);
    const auto tc = train_config(c);

    json log = json::object();
    bool fallback = false;
    if (c.train.hidden.size() > 1) {
        const auto grid = joint::grid_search(t.train, arch, tc, c.train.hidden, c.train.folds);
        json candidates = json::array();
        for (const auto& cand : grid.candidates) {
            candidates.push_back({{"hidden", {cand.arch.hidden1, cand.arch.hidden2}},
                                  {"parameters", cand.arch.parameter_count()},
                                  {"rmse", cand.summary.folds.at("rmse").mean},
                                  {"rmse_std", cand.summary.folds.at("rmse").std}});
        }
        json skipped = json::array();
        for (const auto& h : grid.skipped) skipped.push_back({h.first, h.second});
        log["grid"] = {{"candidates", candidates}, {"skipped", skipped}, {"best", grid.best}, {"fallback", grid.fallback}};
        arch = grid.candidates.at(grid.best).arch;
        fallback = grid.fallback;
    } else {
        arch.hidden1 = c.train.hidden.front().first;
        arch.hidden2 = c.train.hidden.front().second;
        fallback = !joint::admissible(arch, t.train.size());
    }
    if (fallback) {
        spdlog::warn("train: hidden ({}, {}) has {} parameters for {} training windows", arch.hidden1, arch.hidden2,
                     arch.parameter_count(), t.train.size());
    }

    const auto cv = joint::cross_validate(t.train, arch, tc, c.train.folds, t.test);
    log["cross_validation"] = cv_json(cv);

    spdlog::info("train: final model on all {} training windows", t.train.size());
    auto final_run = joint::train(t.train, arch, tc);
    if (final_run.diverged) throw Error(ErrorKind::Numerical, "final model diverged: " + final_run.message);
    json epochs = json::array();
    for (const auto& e : final_run.log) epochs.push_back(joint::to_json(e));
    log["final"] = {{"epochs", epochs}};

    joint::Checkpoint ck{final_run.model, tc, json::object()};
    json modes = json::object();
    for (const auto& [unit, mode] : t.modes) modes[std::to_string(unit)] = mode;
    ck.metadata = {{"tool_version", tool_version()},
                   {"dataset", t.data.dataset_id},
                   {"sensors", t.data.scaler.sensor_names},
                   {"scaler_min", t.data.scaler.min},
                   {"scaler_max", t.data.scaler.max},
                   {"modes", modes},
                   {"inadmissible_fallback", fallback},
                   {"upstream", {{"preprocess", manifest.find(Stage::Preprocess)->key},
                                 {"cluster", manifest.find(Stage::Cluster)->key}}}};
    fs::create_directories(ctx.run_dir / "train");
    joint::save_checkpoint(ctx.run_dir / kCheckpoint, ck);
    write_json(ctx.run_dir / kCvLog, log);

    Produced p;
    p.outputs = {kCheckpoint, kCvLog};
    p.summary["hidden"] = {arch.hidden1, arch.hidden2};
    p.summary["parameters"] = arch.parameter_count();
    p.summary["training_windows"] = t.train.size();
    p.summary["cv_rmse"] = cv.summary.folds.at("rmse").mean;
    p.summary["inadmissible_fallback"] = fallback;
    return p;
}

// ---- evaluate ----------------------------------------------------------------------------------------------

Produced run_evaluate(const RunContext& ctx) {
    const auto ck = joint::load_checkpoint(ctx.run_dir / kCheckpoint);
    const auto data = dataset::load_dataset(ctx.run_dir / kDatasetDir);
    const auto windows = dataset::make_windows(data.test, data.test_windows).instances;
    if (windows.empty()) throw Error(ErrorKind::Config, "no test windows to evaluate");
    if (!data.test.front().has_rul()) throw Error(ErrorKind::Config, "test units carry no RUL truth");
    const auto preds = joint::predict_sequence(ck.model, windows);
    const auto scored = joint::to_eval(preds);
    auto report = eval::evaluate(scored);

    const auto log = read_json(ctx.run_dir / kCvLog);
    std::vector<eval::MetricReport> folds;
    for (const auto& f : log.at("cross_validation").at("folds")) {
        if (!f.at("test").is_null()) folds.push_back(report_from_json(f.at("test")));
    }
    if (!folds.empty()) eval::attach_fold_statistics(report, folds);

    fs::create_directories(ctx.run_dir / "evaluate");
    eval::write_report_json(ctx.run_dir / kMetrics, report);
    eval::write_interval_csv(ctx.run_dir / kIntervals, report.intervals);
    joint::write_predictions_csv(ctx.run_dir / kPredictions, preds);

    Produced p;
    p.outputs = {kMetrics, kIntervals, kPredictions};
    p.summary["rmse"] = report.rmse;
    p.summary["mae"] = report.mae;
    p.summary["mape"] = report.mape;
    p.summary["mr"] = report.mr;
    p.summary["instances"] = report.instances;
    return p;
}

// ---- reproduce ---------------------------------------------------------------------------------------------

Produced run_reproduce(const RunContext& ctx) {
    const auto& c = ctx.config;
    const auto t = load_training_data(ctx.run_dir);
    auto arch = base_architecture(t);
    const auto h = fixed_hidden(c, arch, t.train.size());
    arch.hidden1 = h.first;
    arch.hidden2 = h.second;
    const auto base = train_config(c);

    // eta sweep at the configured lambda, lambda sweep at the configured eta
    std::vector<std::pair<double, double>> settings;
    const auto add = [&](double eta, double lambda) {
        for (const auto& [e, l] : settings) {
            if (e == eta && l == lambda) return;
        }
        settings.emplace_back(eta, lambda);
    };
    for (double eta : c.reproduce.etas) add(eta, base.loss.lambda);
    for (double lambda : c.reproduce.lambdas) add(base.loss.eta, lambda);

    std::vector<std::vector<std::string>> rows;
    json runs = json::array();
    for (const auto& [eta, lambda] : settings) {
        auto tc = base;
        tc.loss.eta = eta;
        tc.loss.lambda = lambda;
        spdlog::info("reproduce: eta {} lambda {}", eta, lambda);
        const auto cv = joint::cross_validate(t.train, arch, tc, c.train.folds, t.test);
        const auto& summary = cv.test_summary ? *cv.test_summary : cv.summary;
        std::vector<std::string> row = {csv::format(eta), std::isinf(lambda) ? "inf" : csv::format(lambda),
                                        cv.test_summary ? "test" : "validation"};
        for (const char* m : {"rmse", "mae", "mape", "mr"}) {
            const auto& s = summary.folds.at(m);
            row.push_back(csv::format(s.mean));
            row.push_back(csv::format(s.std));
        }
        rows.push_back(std::move(row));
        auto j = cv_json(cv);
        j["eta"] = eta;
        j["lambda"] = real_json(lambda);
        runs.push_back(std::move(j));
    }

    fs::create_directories(ctx.run_dir / "reproduce");
    {
        std::ofstream out(ctx.run_dir / kSummaryCsv);
        if (!out) throw Error(ErrorKind::Config, "cannot write " + (ctx.run_dir / kSummaryCsv).string());
        out << "eta,lambda,scored_on,rmse_mean,rmse_std,mae_mean,mae_std,mape_mean,mape_std,mr_mean,mr_std\n";
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
            out << '\n';
        }
    }
    write_json(ctx.run_dir / kSummaryJson, {{"hidden", {arch.hidden1, arch.hidden2}}, {"runs", runs}});

    Produced p;
    p.outputs = {kSummaryCsv, kSummaryJson};
    p.summary["settings"] = settings.size();
    p.summary["hidden"] = {arch.hidden1, arch.hidden2};
    return p;
}

}  // namespace

const char* tool_version() { return FMPROG_VERSION; }

std::string config_key(Stage stage, const RunConfig& config) { return sha256_hex(block_json(stage, config).dump()); }

StageOutcome run_stage(Stage stage, const RunContext& ctx) {
    ctx.config.validate();
    RunLock lock(ctx.run_dir);
    auto manifest = RunManifest::load(ctx.run_dir);
    check_upstream(stage, manifest, ctx.config);
    const std::string extra = stage == Stage::Preprocess ? raw_data_hash(ctx.config) : std::string();
    const auto key = stage_key(stage, ctx.config, manifest, extra);

    StageOutcome outcome;
    outcome.stage = stage;
    if (!ctx.force && manifest.is_current(stage, key)) {
        manifest.note_cache_hit(stage);
        manifest.save();
        const auto* r = manifest.find(stage);
        outcome.cached = true;
        for (const auto& o : r->outputs) outcome.outputs.push_back(o.path);
        outcome.summary = r->summary;
        spdlog::info("{}: outputs are current, nothing to do (use --force to rerun)", to_string(stage));
        return outcome;
    }

    const auto start = std::chrono::steady_clock::now();
    Produced produced;
    switch (stage) {
    case Stage::Preprocess: produced = run_preprocess(ctx); break;
    case Stage::Embed: produced = run_embed(ctx); break;
    case Stage::Cluster: produced = run_cluster(ctx); break;
    case Stage::Train: produced = run_train(ctx, manifest); break;
    case Stage::Evaluate: produced = run_evaluate(ctx); break;
    case Stage::Reproduce: produced = run_reproduce(ctx); break;
    }
    outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    StageRecord record;
    record.key = key;
    record.outputs = hash_outputs(ctx.run_dir, produced.outputs);
    record.seconds = outcome.seconds;
    record.completed_at = utc_now();
    record.summary = produced.summary;
    record.summary["config_key"] = config_key(stage, ctx.config);
    manifest.config_hash = sha256_hex(to_json(ctx.config).dump());
    manifest.tool_version = tool_version();
    manifest.record(stage, record);
    manifest.save();

    for (const auto& o : record.outputs) outcome.outputs.push_back(o.path);
    outcome.summary = record.summary;
    spdlog::info("{}: done in {:.1f}s", to_string(stage), outcome.seconds);
    return outcome;
}

}  // namespace fmprog::pipeline
