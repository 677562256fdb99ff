#include "fmprog/pipeline/config.hpp"

#include "fmprog/csv.hpp"
#include "fmprog/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fmprog::pipeline {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"dataset", {"id", "root"}},
        {"preprocess", {"ntw", "stride", "pad_short", "min_std", "max_missing"}},
        {"umap", {"n_neighbors", "min_dist", "n_components", "epochs", "learning_rate", "negative_sample_rate", "seed",
                  "knn", "parallel_layout"}},
        {"cluster", {"modes", "max_modes", "elbow_threshold", "restarts", "max_iterations", "tolerance", "seed"}},
        {"train", {"lambda", "eta", "zeta", "a", "epochs", "batch_size", "learning_rate", "seed", "hidden", "folds",
                   "validate_every"}},
        {"reproduce", {"etas", "lambdas"}},
    };
    return keys;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& text) {
    const auto t = trim(text);
    if (t == "inf" || t == "infinity") return std::numeric_limits<double>::infinity();
    try {
        return csv::parse_double(t);
    } catch (const Error&) {
        throw Error(ErrorKind::Config, key + ": expected a number, got '" + text + "'");
    }
}

long long parse_integer(const std::string& key, const std::string& text) {
    const auto t = trim(text);
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(t, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != t.size()) throw Error(ErrorKind::Config, key + ": expected an integer, got '" + text + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    const auto t = trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw Error(ErrorKind::Config, key + ": expected true or false, got '" + text + "'");
}

std::vector<double> parse_reals(const std::string& key, const std::string& text) {
    std::vector<double> out;
    for (auto part : csv::split(text, ',')) out.push_back(parse_real(key, std::string(part)));
    return out;
}

// "grid" or "h1,h2[;h1,h2...]"
std::vector<joint::HiddenSizes> parse_hidden(const std::string& key, const std::string& text) {
    if (trim(text) == "grid") return joint::hidden_grid();
    std::vector<joint::HiddenSizes> out;
    for (auto pair : csv::split(text, ';')) {
        const auto nums = csv::split(pair, ',');
        if (nums.size() != 2) throw Error(ErrorKind::Config, key + ": expected h1,h2 pairs or 'grid'");
        out.push_back({static_cast<int>(parse_integer(key, std::string(nums[0]))),
                       static_cast<int>(parse_integer(key, std::string(nums[1])))});
    }
    return out;
}

std::string real_text(double v) { return std::isinf(v) ? "inf" : csv::format(v); }

template <class T>
std::string join(const std::vector<T>& xs, const std::string& sep, auto&& fmt) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? sep : "") + fmt(xs[i]);
    return out;
}

nlohmann::json real_json(double v) { return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v); }

}  // namespace

RunConfig::RunConfig() {
    train.config.learning_rate = 1e-4;
    train.hidden = joint::hidden_grid();
}

void RunConfig::validate() const {
    const auto fail = [](const std::string& what) { throw Error(ErrorKind::Parameter, what); };
    if (dataset.id.empty()) fail("dataset.id must be set");
    if (preprocess.ntw < 1) fail("preprocess.ntw must be >= 1");
    if (preprocess.stride < 1) fail("preprocess.stride must be >= 1");
    if (!(preprocess.min_std >= 0.0)) fail("preprocess.min_std must be >= 0");
    if (!(preprocess.max_missing > 0.0 && preprocess.max_missing <= 1.0)) fail("preprocess.max_missing must be in (0, 1]");
    if (umap.n_neighbors < 2) fail("umap.n_neighbors must be >= 2");
    if (!(umap.min_dist > 0.0)) fail("umap.min_dist must be > 0");
    if (umap.n_components < 1) fail("umap.n_components must be >= 1");
    if (umap.epochs < 0) fail("umap.epochs must be >= 0");
    if (!(umap.learning_rate > 0.0)) fail("umap.learning_rate must be > 0");
    if (umap.negative_sample_rate < 0) fail("umap.negative_sample_rate must be >= 0");
    if (cluster.modes < 0) fail("cluster.modes must be >= 0");
    if (cluster.max_modes < 1) fail("cluster.max_modes must be >= 1");
    if (cluster.restarts < 1) fail("cluster.restarts must be >= 1");
    if (cluster.max_iterations < 1) fail("cluster.max_iterations must be >= 1");
    if (!(cluster.tolerance >= 0.0)) fail("cluster.tolerance must be >= 0");
    train.config.validate();
    if (train.hidden.empty()) fail("train.hidden must list at least one pair");
    for (const auto& h : train.hidden) {
        if (h.first < 1 || h.second < 1) fail("train.hidden sizes must be >= 1");
    }
    if (train.folds < 2) fail("train.folds must be >= 2");
    if (reproduce.etas.empty() || reproduce.lambdas.empty()) fail("reproduce.etas and reproduce.lambdas must be non-empty");
}

std::filesystem::path RunConfig::dataset_root() const {
    if (!dataset.root.empty()) return dataset.root;
    if (const char* env = std::getenv(kDatasetRootEnv); env && *env) return env;
    throw Error(ErrorKind::Config, std::string("dataset root not set: use dataset.root or $") + kDatasetRootEnv);
}

void RunConfig::set_seed(std::uint64_t seed) {
    umap.seed = seed;
    cluster.seed = seed;
    train.config.seed = seed;
}

RunConfig parse_config(std::istream& in) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorKind::Config, std::string("config: ") + e.what());
    }
    RunConfig c;
    for (const auto& [section, body] : tree) {
        const auto known = known_keys().find(section);
        if (known == known_keys().end()) throw Error(ErrorKind::Config, "config: unknown section [" + section + "]");
        if (!body.data().empty()) throw Error(ErrorKind::Config, "config: key '" + section + "' outside a section");
        for (const auto& [key, node] : body) {
            if (!known->second.count(key)) throw Error(ErrorKind::Config, "config: unknown key " + section + "." + key);
            const std::string name = section + "." + key;
            const std::string v = node.data();
            if (section == "dataset") {
                if (key == "id") c.dataset.id = trim(v);
                if (key == "root") c.dataset.root = trim(v);
            } else if (section == "preprocess") {
                if (key == "ntw") c.preprocess.ntw = static_cast<int>(parse_integer(name, v));
                if (key == "stride") c.preprocess.stride = static_cast<int>(parse_integer(name, v));
                if (key == "pad_short") c.preprocess.pad_short = parse_bool(name, v);
                if (key == "min_std") c.preprocess.min_std = parse_real(name, v);
                if (key == "max_missing") c.preprocess.max_missing = parse_real(name, v);
            } else if (section == "umap") {
                if (key == "n_neighbors") c.umap.n_neighbors = static_cast<int>(parse_integer(name, v));
                if (key == "min_dist") c.umap.min_dist = parse_real(name, v);
                if (key == "n_components") c.umap.n_components = static_cast<int>(parse_integer(name, v));
                if (key == "epochs") c.umap.epochs = static_cast<int>(parse_integer(name, v));
                if (key == "learning_rate") c.umap.learning_rate = parse_real(name, v);
                if (key == "negative_sample_rate") c.umap.negative_sample_rate = static_cast<int>(parse_integer(name, v));
                if (key == "seed") c.umap.seed = static_cast<std::uint64_t>(parse_integer(name, v));
                if (key == "parallel_layout") c.umap.parallel_layout = parse_bool(name, v);
                if (key == "knn") {
                    const auto t = trim(v);
                    if (t != "exact" && t != "approximate") throw Error(ErrorKind::Config, name + ": exact or approximate");
                    c.umap.knn = t == "exact" ? umap::KnnBackend::Exact : umap::KnnBackend::Approximate;
                }
            } else if (section == "cluster") {
                if (key == "modes") c.cluster.modes = trim(v) == "auto" ? 0 : static_cast<int>(parse_integer(name, v));
                if (key == "max_modes") c.cluster.max_modes = static_cast<int>(parse_integer(name, v));
                if (key == "elbow_threshold") c.cluster.elbow_threshold = parse_real(name, v);
                if (key == "restarts") c.cluster.restarts = static_cast<int>(parse_integer(name, v));
                if (key == "max_iterations") c.cluster.max_iterations = static_cast<int>(parse_integer(name, v));
                if (key == "tolerance") c.cluster.tolerance = parse_real(name, v);
                if (key == "seed") c.cluster.seed = static_cast<std::uint64_t>(parse_integer(name, v));
            } else if (section == "train") {
                auto& t = c.train.config;
                if (key == "lambda") t.loss.lambda = parse_real(name, v);
                if (key == "eta") t.loss.eta = parse_real(name, v);
                if (key == "zeta") t.loss.zeta = parse_real(name, v);
                if (key == "a") t.loss.a = parse_real(name, v);
                if (key == "epochs") t.epochs = static_cast<int>(parse_integer(name, v));
                if (key == "batch_size") t.batch_size = static_cast<int>(parse_integer(name, v));
                if (key == "learning_rate") t.learning_rate = parse_real(name, v);
                if (key == "seed") t.seed = static_cast<std::uint64_t>(parse_integer(name, v));
                if (key == "validate_every") t.validate_every = static_cast<int>(parse_integer(name, v));
                if (key == "hidden") c.train.hidden = parse_hidden(name, v);
                if (key == "folds") c.train.folds = static_cast<int>(parse_integer(name, v));
            } else if (section == "reproduce") {
                if (key == "etas") c.reproduce.etas = parse_reals(name, v);
                if (key == "lambdas") c.reproduce.lambdas = parse_reals(name, v);
            }
        }
    }
    c.train.config.loss.stride = c.preprocess.stride;
    return c;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::Config, "cannot read config " + file.string());
    try {
        return parse_config(in);
    } catch (const Error& e) {
        throw Error(e.kind(), file.string() + ": " + e.what());
    }
}

std::string render_config(const RunConfig& c) {
    std::ostringstream o;
    const auto& t = c.train.config;
    o << "[dataset]\nid = " << c.dataset.id << '\n';
    if (!c.dataset.root.empty()) o << "root = " << c.dataset.root.string() << '\n';
    o << "\n[preprocess]\nntw = " << c.preprocess.ntw << "\nstride = " << c.preprocess.stride
      << "\npad_short = " << (c.preprocess.pad_short ? "true" : "false") << "\nmin_std = " << real_text(c.preprocess.min_std)
      << "\nmax_missing = " << real_text(c.preprocess.max_missing) << '\n';
    o << "\n[umap]\nn_neighbors = " << c.umap.n_neighbors << "\nmin_dist = " << real_text(c.umap.min_dist)
      << "\nn_components = " << c.umap.n_components << "\nepochs = " << c.umap.epochs
      << "\nlearning_rate = " << real_text(c.umap.learning_rate) << "\nnegative_sample_rate = " << c.umap.negative_sample_rate
      << "\nseed = " << c.umap.seed << "\nknn = " << (c.umap.knn == umap::KnnBackend::Exact ? "exact" : "approximate")
      << "\nparallel_layout = " << (c.umap.parallel_layout ? "true" : "false") << '\n';
    o << "\n[cluster]\nmodes = " << (c.cluster.modes == 0 ? std::string("auto") : std::to_string(c.cluster.modes))
      << "\nmax_modes = " << c.cluster.max_modes << "\nelbow_threshold = " << real_text(c.cluster.elbow_threshold)
      << "\nrestarts = " << c.cluster.restarts << "\nmax_iterations = " << c.cluster.max_iterations
      << "\ntolerance = " << real_text(c.cluster.tolerance) << "\nseed = " << c.cluster.seed << '\n';
    o << "\n[train]\nlambda = " << real_text(t.loss.lambda) << "\neta = " << real_text(t.loss.eta)
      << "\nzeta = " << real_text(t.loss.zeta) << "\na = " << real_text(t.loss.a) << "\nepochs = " << t.epochs
      << "\nbatch_size = " << t.batch_size << "\nlearning_rate = " << real_text(t.learning_rate) << "\nseed = " << t.seed
      << "\nvalidate_every = " << t.validate_every << "\nhidden = "
      << join(c.train.hidden, ";", [](const joint::HiddenSizes& h) { return std::to_string(h.first) + "," + std::to_string(h.second); })
      << "\nfolds = " << c.train.folds << '\n';
    o << "\n[reproduce]\netas = " << join(c.reproduce.etas, ",", real_text)
      << "\nlambdas = " << join(c.reproduce.lambdas, ",", real_text) << '\n';
    return o.str();
}

nlohmann::json to_json(const DatasetBlock& b) { return {{"id", b.id}, {"root", b.root.string()}}; }

nlohmann::json to_json(const PreprocessBlock& b) {
    return {{"ntw", b.ntw}, {"stride", b.stride}, {"pad_short", b.pad_short}, {"min_std", b.min_std},
            {"max_missing", b.max_missing}};
}

nlohmann::json to_json(const umap::UmapConfig& b) {
    // parallel_layout changes results (unsynchronised updates), so it is part of the hash.
    return {{"n_neighbors", b.n_neighbors},
            {"min_dist", b.min_dist},
            {"n_components", b.n_components},
            {"epochs", b.epochs},
            {"learning_rate", b.learning_rate},
            {"negative_sample_rate", b.negative_sample_rate},
            {"seed", b.seed},
            {"knn", b.knn == umap::KnnBackend::Exact ? "exact" : "approximate"},
            {"parallel_layout", b.parallel_layout}};
}

nlohmann::json to_json(const ClusterBlock& b) {
    return {{"modes", b.modes},         {"max_modes", b.max_modes},         {"elbow_threshold", b.elbow_threshold},
            {"restarts", b.restarts},   {"max_iterations", b.max_iterations}, {"tolerance", b.tolerance},
            {"seed", b.seed}};
}

nlohmann::json to_json(const TrainBlock& b) {
    nlohmann::json hidden = nlohmann::json::array();
    for (const auto& h : b.hidden) hidden.push_back({h.first, h.second});
    return {{"config", joint::to_json(b.config)}, {"hidden", hidden}, {"folds", b.folds}};
}

nlohmann::json to_json(const ReproduceBlock& b) {
    nlohmann::json etas = nlohmann::json::array(), lambdas = nlohmann::json::array();
    for (double e : b.etas) etas.push_back(real_json(e));
    for (double l : b.lambdas) lambdas.push_back(real_json(l));
    return {{"etas", etas}, {"lambdas", lambdas}};
}

nlohmann::json to_json(const RunConfig& c) {
    return {{"dataset", to_json(c.dataset)}, {"preprocess", to_json(c.preprocess)}, {"umap", to_json(c.umap)},
            {"cluster", to_json(c.cluster)}, {"train", to_json(c.train)},           {"reproduce", to_json(c.reproduce)}};
}

}  // namespace fmprog::pipeline
