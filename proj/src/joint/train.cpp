#include "fmprog/joint/train.hpp"

#include "fmprog/csv.hpp"
#include "fmprog/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace fmprog::joint {

namespace {

// Indices sorted by (unit, end cycle).
std::vector<std::size_t> canonical_order(std::span<const dataset::WindowInstance> instances) {
    std::vector<std::size_t> order(instances.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(instances[a].unit_id, instances[a].end_cycle) < std::tie(instances[b].unit_id, instances[b].end_cycle);
    });
    return order;
}

std::vector<dataset::WindowInstance> subset(std::span<const dataset::WindowInstance> instances,
                                            const std::vector<int>& units, bool keep) {
    std::vector<dataset::WindowInstance> out;
    for (const auto& w : instances) {
        const bool in = std::binary_search(units.begin(), units.end(), w.unit_id);
        if (in == keep) out.push_back(w);
    }
    return out;
}

eval::MetricReport score(const JointModel& model, std::span<const dataset::WindowInstance> windows) {
    std::vector<dataset::WindowInstance> sorted;
    sorted.reserve(windows.size());
    for (auto i : canonical_order(windows)) sorted.push_back(windows[i]);
    const auto preds = predict_sequence(model, sorted);
    const auto flat = to_eval(preds);
    return eval::evaluate(flat);
}

double json_number(const nlohmann::json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        throw Error(ErrorKind::Parse, "checkpoint: unexpected number text '" + s + "'");
    }
    return j.get<double>();
}

nlohmann::json number_json(double v) {
    if (std::isinf(v)) return "inf";
    return v;
}

}  // namespace

void TrainConfig::validate() const {
    loss.validate();
    if (epochs < 0) throw Error(ErrorKind::Parameter, "train: epochs must be >= 0");
    if (batch_size < 1) throw Error(ErrorKind::Parameter, "train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::Parameter, "train: learning_rate must be > 0");
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (m.size() != params.size()) {
        m = Eigen::VectorXd::Zero(params.size());
        v = Eigen::VectorXd::Zero(params.size());
        step_count = 0;
    }
    ++step_count;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    params.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const dataset::WindowInstance> instances, int batch_size) {
    if (batch_size < 1) throw Error(ErrorKind::Parameter, "make_batches: batch_size must be >= 1");
    std::vector<std::vector<std::size_t>> batches;
    const auto order = canonical_order(instances);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const bool new_unit = i == 0 || instances[order[i]].unit_id != instances[order[i - 1]].unit_id;
        if (new_unit || batches.back().size() == static_cast<std::size_t>(batch_size)) batches.emplace_back();
        batches.back().push_back(order[i]);
    }
    return batches;
}

Batch gather(std::span<const dataset::WindowInstance> instances, std::span<const std::size_t> indices) {
    Batch b;
    for (auto i : indices) {
        const auto& w = instances[i];
        b.inputs.push_back(&w.x);
        b.targets.push_back(w.rul_target);
        b.modes.push_back(w.mode.value_or(-1));
        b.unit_ids.push_back(w.unit_id);
        b.end_cycles.push_back(w.end_cycle);
    }
    return b;
}

std::pair<double, double> rul_scaling(std::span<const dataset::WindowInstance> instances) {
    if (instances.empty()) return {1.0, 0.0};
    double max = 0.0, sum = 0.0;
    for (const auto& w : instances) {
        max = std::max(max, w.rul_target);
        sum += w.rul_target;
    }
    return {std::max(1.0, max), sum / static_cast<double>(instances.size())};
}

TrainResult train(std::span<const dataset::WindowInstance> instances, const Architecture& arch, const TrainConfig& config,
                  std::span<const dataset::WindowInstance> validation) {
    config.validate();
    if (instances.empty()) throw Error(ErrorKind::Contract, "train: no training instances");
    const auto [scale, offset] = rul_scaling(instances);
    TrainResult result;
    result.model = JointModel(arch, scale, offset, config.seed);

    const auto batches = make_batches(instances, config.batch_size);
    std::vector<Batch> gathered;
    gathered.reserve(batches.size());
    for (const auto& idx : batches) gathered.push_back(gather(instances, idx));
    std::vector<std::size_t> order(batches.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    Adam adam;
    adam.learning_rate = config.learning_rate;
    Eigen::VectorXd grad;
    const auto n = static_cast<double>(instances.size());
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::mt19937_64 rng(mix64(config.seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);
        const Eigen::VectorXd last_good = result.model.parameters();
        const Adam last_adam = adam;
        EpochRecord rec;
        rec.epoch = epoch;
        bool finite = true;
        for (auto b : order) {
            const auto& batch = gathered[b];
            const auto parts = result.model.loss(batch, config.loss, &grad);
            if (!std::isfinite(parts.total) || !grad.allFinite()) {
                finite = false;
                break;
            }
            rec.loss += parts.total;
            rec.classification += parts.classification;
            rec.regression += parts.regression;
            rec.monotonic += parts.monotonic;
            grad /= static_cast<double>(batch.size());
            adam.step(result.model.parameters(), grad);
        }
        if (!finite || !result.model.parameters().allFinite()) {
            result.model.parameters() = last_good;
            adam = last_adam;
            result.diverged = true;
            result.message = "non-finite loss in epoch " + std::to_string(epoch) + "; kept parameters from epoch " +
                             std::to_string(epoch - 1);
            spdlog::warn("train: {}", result.message);
            break;
        }
        rec.loss /= n;
        rec.classification /= n;
        rec.regression /= n;
        rec.monotonic /= n;
        if (!validation.empty() && config.validate_every > 0 &&
            (epoch % config.validate_every == 0 || epoch == config.epochs)) {
            const auto report = score(result.model, validation);
            rec.validation_rmse = report.rmse;
            rec.validation_mr = report.mr;
        }
        result.log.push_back(rec);
    }
    return result;
}

std::vector<UnitPrediction> predict_sequence(const JointModel& model, std::span<const dataset::WindowInstance> windows,
                                             int chunk) {
    std::vector<UnitPrediction> out;
    out.reserve(windows.size());
    const int modes = model.architecture().modes;
    for (std::size_t start = 0; start < windows.size(); start += static_cast<std::size_t>(chunk)) {
        const std::size_t stop = std::min(windows.size(), start + static_cast<std::size_t>(chunk));
        std::vector<const RowMatrix*> inputs;
        for (std::size_t i = start; i < stop; ++i) inputs.push_back(&windows[i].x);
        const auto y = model.forward(inputs);
        for (std::size_t i = start; i < stop; ++i) {
            const auto r = static_cast<Eigen::Index>(i - start);
            UnitPrediction p;
            p.unit_id = windows[i].unit_id;
            p.end_cycle = windows[i].end_cycle;
            p.truth = windows[i].rul_target;
            p.rul = y.rul[r];
            for (int v = 0; v < modes; ++v) {
                p.mode_rul.push_back(y.mode_rul(r, v));
                p.probabilities.push_back(y.probabilities(r, v));
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::vector<eval::Prediction> to_eval(std::span<const UnitPrediction> preds) {
    std::vector<eval::Prediction> out;
    out.reserve(preds.size());
    for (const auto& p : preds) out.push_back({p.unit_id, p.end_cycle, p.truth, p.rul});
    return out;
}

void write_predictions_csv(const std::filesystem::path& file, std::span<const UnitPrediction> preds) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + file.string());
    const std::size_t modes = preds.empty() ? 0 : preds.front().probabilities.size();
    out << "unit_id,cycle,true_rul,pred_rul";
    for (std::size_t v = 0; v < modes; ++v) out << ",p_mode_" << (v + 1);
    for (std::size_t v = 0; v < modes; ++v) out << ",rul_mode_" << (v + 1);
    out << '\n';
    for (const auto& p : preds) {
        out << p.unit_id << ',' << p.end_cycle << ',' << csv::format(p.truth) << ',' << csv::format(p.rul);
        for (double q : p.probabilities) out << ',' << csv::format(q);
        for (double r : p.mode_rul) out << ',' << csv::format(r);
        out << '\n';
    }
}

GradCheckReport grad_check(const JointModel& model, const Batch& batch, const LossConfig& config, double step,
                           std::span<const Eigen::Index> subset) {
    Eigen::VectorXd analytic;
    const auto base = model.loss(batch, config, &analytic);
    GradCheckReport report;
    std::vector<Eigen::Index> indices(subset.begin(), subset.end());
    if (indices.empty()) {
        indices.resize(static_cast<std::size_t>(analytic.size()));
        std::iota(indices.begin(), indices.end(), Eigen::Index{0});
    }
    report.parameters = indices.size();
    report.kink_margin = base.kink_margin;
    // Central differences carry roundoff of about eps |L| / step; components below this floor are
    // compared in absolute terms.
    const double floor = 1e-6 * std::max(1.0, std::abs(base.total));
    JointModel probe = model;
    auto& theta = probe.parameters();
    for (const Eigen::Index j : indices) {
        const double keep = theta[j];
        theta[j] = keep + step;
        const double up = probe.loss(batch, config).total;
        theta[j] = keep - step;
        const double down = probe.loss(batch, config).total;
        theta[j] = keep;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[j]), std::abs(numeric), floor});
        const double rel = std::abs(analytic[j] - numeric) / denom;
        if (rel > report.max_relative_error) {
            report.max_relative_error = rel;
            report.worst_parameter = static_cast<std::size_t>(j);
        }
    }
    return report;
}

std::vector<HiddenSizes> hidden_grid() { return {{16, 16}, {16, 32}, {32, 32}, {32, 64}, {64, 64}}; }

bool admissible(const Architecture& arch, std::size_t training_instances) {
    return 3 * arch.parameter_count() <= 2 * training_instances;
}

std::vector<std::vector<int>> unit_folds(std::vector<int> unit_ids, int k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorKind::Parameter, "unit_folds: need at least two folds");
    std::sort(unit_ids.begin(), unit_ids.end());
    unit_ids.erase(std::unique(unit_ids.begin(), unit_ids.end()), unit_ids.end());
    if (unit_ids.size() < static_cast<std::size_t>(k)) {
        throw Error(ErrorKind::Parameter, "unit_folds: fewer units (" + std::to_string(unit_ids.size()) + ") than folds");
    }
    std::mt19937_64 rng(seed);
    std::shuffle(unit_ids.begin(), unit_ids.end(), rng);
    std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < unit_ids.size(); ++i) folds[i % folds.size()].push_back(unit_ids[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

CrossValidation cross_validate(std::span<const dataset::WindowInstance> instances, const Architecture& arch,
                               const TrainConfig& config, int folds, std::span<const dataset::WindowInstance> test) {
    std::vector<int> units;
    for (const auto& w : instances) units.push_back(w.unit_id);
    const auto split = unit_folds(units, folds, config.seed);

    CrossValidation cv;
    cv.arch = arch;
    std::vector<eval::Prediction> pooled, pooled_test;
    std::vector<eval::MetricReport> reports, test_reports;
    for (int f = 0; f < folds; ++f) {
        const auto& held = split[static_cast<std::size_t>(f)];
        const auto train_set = subset(instances, held, false);
        const auto valid_set = subset(instances, held, true);
        auto fold_config = config;
        fold_config.seed = mix64(config.seed, static_cast<std::uint64_t>(f));
        spdlog::info("cross_validate: fold {}/{} hidden ({}, {}), {} train / {} held-out windows", f + 1, folds,
                     arch.hidden1, arch.hidden2, train_set.size(), valid_set.size());
        auto trained = train(train_set, arch, fold_config, valid_set);

        FoldResult fr;
        fr.fold = f;
        fr.validation_units = held;
        fr.diverged = trained.diverged;
        fr.log = std::move(trained.log);
        const auto preds = to_eval(predict_sequence(trained.model, valid_set));
        fr.report = eval::evaluate(preds);
        pooled.insert(pooled.end(), preds.begin(), preds.end());
        reports.push_back(fr.report);
        if (!test.empty()) {
            const auto tp = to_eval(predict_sequence(trained.model, test));
            fr.test = eval::evaluate(tp);
            pooled_test.insert(pooled_test.end(), tp.begin(), tp.end());
            test_reports.push_back(*fr.test);
        }
        cv.folds.push_back(std::move(fr));
    }
    cv.summary = eval::evaluate(pooled);
    eval::attach_fold_statistics(cv.summary, reports);
    if (!test.empty()) {
        cv.test_summary = eval::evaluate(pooled_test);
        eval::attach_fold_statistics(*cv.test_summary, test_reports);
    }
    return cv;
}

GridSearch grid_search(std::span<const dataset::WindowInstance> instances, Architecture arch, const TrainConfig& config,
                       std::span<const HiddenSizes> grid, int folds) {
    if (grid.empty()) throw Error(ErrorKind::Parameter, "grid_search: empty grid");
    // Every fold trains on roughly (k-1)/k of the instances.
    const std::size_t per_fold = instances.size() * static_cast<std::size_t>(folds - 1) / static_cast<std::size_t>(folds);
    GridSearch gs;
    std::vector<HiddenSizes> chosen;
    for (const auto& h : grid) {
        arch.hidden1 = h.first;
        arch.hidden2 = h.second;
        if (admissible(arch, per_fold)) {
            chosen.push_back(h);
        } else {
            gs.skipped.push_back(h);
            spdlog::info("grid_search: skip ({}, {}): {} parameters > 2/3 of {} instances", h.first, h.second,
                         arch.parameter_count(), per_fold);
        }
    }
    if (chosen.empty()) {
        const auto smallest = std::min_element(grid.begin(), grid.end(), [&](const auto& a, const auto& b) {
            Architecture x = arch, y = arch;
            x.hidden1 = a.first, x.hidden2 = a.second;
            y.hidden1 = b.first, y.hidden2 = b.second;
            return x.parameter_count() < y.parameter_count();
        });
        spdlog::warn("grid_search: every configuration exceeds the parameter budget; using ({}, {})", smallest->first,
                     smallest->second);
        chosen.push_back(*smallest);
        gs.fallback = true;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& h : chosen) {
        arch.hidden1 = h.first;
        arch.hidden2 = h.second;
        gs.candidates.push_back(cross_validate(instances, arch, config, folds));
        const double rmse = gs.candidates.back().summary.folds.at("rmse").mean;
        if (rmse < best) {
            best = rmse;
            gs.best = gs.candidates.size() - 1;
        }
    }
    return gs;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"lambda", number_json(c.loss.lambda)},
            {"eta", c.loss.eta},
            {"zeta", c.loss.zeta},
            {"a", c.loss.a},
            {"stride", c.loss.stride},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"seed", c.seed},
            {"validate_every", c.validate_every}};
}

nlohmann::json to_json(const EpochRecord& r) {
    nlohmann::json j = {{"epoch", r.epoch},
                        {"loss", r.loss},
                        {"classification", r.classification},
                        {"regression", r.regression},
                        {"monotonic", r.monotonic}};
    if (r.validation_rmse) j["validation_rmse"] = *r.validation_rmse;
    if (r.validation_mr) j["validation_mr"] = *r.validation_mr;
    return j;
}

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ck) {
    const auto& a = ck.model.architecture();
    nlohmann::json j;
    j["format"] = "fmprog-joint-checkpoint";
    j["version"] = kCheckpointVersion;
    j["architecture"] = {{"window", a.window}, {"features", a.features}, {"modes", a.modes},
                         {"hidden1", a.hidden1}, {"hidden2", a.hidden2}};
    j["rul_scale"] = ck.model.rul_scale();
    j["config"] = to_json(ck.config);
    j["metadata"] = ck.metadata;
    const auto& p = ck.model.parameters();
    j["parameters"] = std::vector<double>(p.data(), p.data() + p.size());
    const auto tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw Error(ErrorKind::Config, "cannot write " + tmp);
        out << j.dump() << '\n';
    }
    std::filesystem::rename(tmp, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
    if (!std::filesystem::exists(file)) throw Error(ErrorKind::MissingArtifact, "checkpoint not found: " + file.string());
    std::ifstream in(file);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, file.string() + ": " + e.what());
    }
    try {
        if (j.at("format") != "fmprog-joint-checkpoint" || j.at("version").get<int>() != kCheckpointVersion) {
            throw Error(ErrorKind::Parse, file.string() + ": unsupported checkpoint format or version");
        }
        const auto& ja = j.at("architecture");
        Architecture a;
        a.window = ja.at("window");
        a.features = ja.at("features");
        a.modes = ja.at("modes");
        a.hidden1 = ja.at("hidden1");
        a.hidden2 = ja.at("hidden2");
        const auto values = j.at("parameters").get<std::vector<double>>();
        Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
        Checkpoint ck{JointModel(a, j.at("rul_scale").get<double>(), std::move(p)), {}, j.value("metadata", nlohmann::json::object())};
        const auto& jc = j.at("config");
        ck.config.loss.lambda = json_number(jc.at("lambda"));
        ck.config.loss.eta = jc.at("eta");
        ck.config.loss.zeta = jc.at("zeta");
        ck.config.loss.a = jc.at("a");
        ck.config.loss.stride = jc.at("stride");
        ck.config.epochs = jc.at("epochs");
        ck.config.batch_size = jc.at("batch_size");
        ck.config.learning_rate = jc.at("learning_rate");
        ck.config.seed = jc.at("seed");
        ck.config.validate_every = jc.value("validate_every", 0);
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, file.string() + ": " + e.what());
    }
}

}  // namespace fmprog::joint
