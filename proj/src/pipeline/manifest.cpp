#include "fmprog/pipeline/manifest.hpp"

#include "fmprog/error.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>

namespace fmprog::pipeline {

namespace {

constexpr std::array<Stage, 6> kStages = {Stage::Preprocess, Stage::Embed,    Stage::Cluster,
                                          Stage::Train,      Stage::Evaluate, Stage::Reproduce};

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw Error(ErrorKind::Numerical, "sha256: digest initialisation failed");
        }
    }
    void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
        static constexpr char kDigits[] = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out += kDigits[md[i] >> 4];
            out += kDigits[md[i] & 15];
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

StageRecord record_from_json(const nlohmann::json& j) {
    StageRecord r;
    r.key = j.at("key").get<std::string>();
    for (const auto& o : j.at("outputs")) r.outputs.push_back({o.at("path"), o.at("sha256")});
    r.seconds = j.value("seconds", 0.0);
    r.completed_at = j.value("completed_at", "");
    r.cache_hits = j.value("cache_hits", 0);
    r.summary = j.value("summary", nlohmann::json::object());
    return r;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
    Sha256 h;
    h.update(data.data(), data.size());
    return h.hex();
}

std::string sha256_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorKind::MissingArtifact, "cannot read " + file.string());
    Sha256 h;
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

const char* to_string(Stage stage) {
    switch (stage) {
    case Stage::Preprocess: return "preprocess";
    case Stage::Embed: return "embed";
    case Stage::Cluster: return "cluster";
    case Stage::Train: return "train";
    case Stage::Evaluate: return "evaluate";
    case Stage::Reproduce: return "reproduce";
    }
    return "unknown";
}

std::optional<Stage> stage_from_string(std::string_view name) {
    for (Stage s : kStages) {
        if (name == to_string(s)) return s;
    }
    return std::nullopt;
}

std::vector<Stage> upstream_of(Stage stage) {
    switch (stage) {
    case Stage::Preprocess: return {};
    case Stage::Embed: return {Stage::Preprocess};
    case Stage::Cluster: return {Stage::Embed};
    case Stage::Train: return {Stage::Preprocess, Stage::Cluster};
    case Stage::Evaluate: return {Stage::Train};
    case Stage::Reproduce: return {Stage::Preprocess, Stage::Cluster};
    }
    return {};
}

std::vector<Stage> downstream_of(Stage stage) {
    std::vector<Stage> out;
    for (Stage s : kStages) {
        for (Stage up : upstream_of(s)) {
            if (up == stage || std::find(out.begin(), out.end(), up) != out.end()) {
                out.push_back(s);
                break;
            }
        }
    }
    return out;
}

RunManifest::RunManifest(std::filesystem::path run_dir) : run_dir_(std::move(run_dir)) {}

RunManifest RunManifest::load(const std::filesystem::path& run_dir) {
    RunManifest m(run_dir);
    const auto file = run_dir / kFileName;
    if (!std::filesystem::exists(file)) return m;
    std::ifstream in(file);
    try {
        const auto j = nlohmann::json::parse(in);
        m.config_hash = j.value("config_hash", "");
        m.tool_version = j.value("tool_version", "");
        for (Stage s : kStages) {
            if (j.at("stages").contains(to_string(s))) m.stages_.emplace_back(s, record_from_json(j["stages"][to_string(s)]));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, file.string() + ": " + e.what());
    }
    return m;
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json stages = nlohmann::json::object();
    for (const auto& [stage, r] : stages_) {
        nlohmann::json outputs = nlohmann::json::array();
        for (const auto& o : r.outputs) outputs.push_back({{"path", o.path}, {"sha256", o.sha256}});
        stages[to_string(stage)] = {{"key", r.key},
                                    {"outputs", outputs},
                                    {"seconds", r.seconds},
                                    {"completed_at", r.completed_at},
                                    {"cache_hits", r.cache_hits},
                                    {"summary", r.summary}};
    }
    return {{"config_hash", config_hash}, {"tool_version", tool_version}, {"stages", stages}};
}

void RunManifest::save() const {
    std::filesystem::create_directories(run_dir_);
    const auto file = run_dir_ / kFileName;
    const auto tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw Error(ErrorKind::Config, "cannot write " + tmp);
        out << to_json().dump(2) << '\n';
    }
    std::filesystem::rename(tmp, file);
}

const StageRecord* RunManifest::find(Stage stage) const {
    for (const auto& [s, r] : stages_) {
        if (s == stage) return &r;
    }
    return nullptr;
}

bool RunManifest::is_current(Stage stage, const std::string& key) const {
    const auto* r = find(stage);
    if (!r || r->key != key) return false;
    for (const auto& o : r->outputs) {
        const auto file = run_dir_ / o.path;
        if (!std::filesystem::exists(file) || sha256_file(file) != o.sha256) return false;
    }
    return true;
}

void RunManifest::record(Stage stage, StageRecord record) {
    const auto* old = find(stage);
    const auto same_outputs = [&] {
        if (old->outputs.size() != record.outputs.size()) return false;
        for (std::size_t i = 0; i < record.outputs.size(); ++i) {
            if (old->outputs[i].path != record.outputs[i].path || old->outputs[i].sha256 != record.outputs[i].sha256) {
                return false;
            }
        }
        return true;
    };
    if (!old || old->key != record.key || !same_outputs()) invalidate_downstream(stage);
    std::erase_if(stages_, [&](const auto& e) { return e.first == stage; });
    stages_.emplace_back(stage, std::move(record));
    std::sort(stages_.begin(), stages_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
}

void RunManifest::note_cache_hit(Stage stage) {
    for (auto& [s, r] : stages_) {
        if (s == stage) ++r.cache_hits;
    }
}

void RunManifest::invalidate_downstream(Stage stage) {
    for (Stage d : downstream_of(stage)) {
        const auto* r = find(d);
        if (!r) continue;
        for (const auto& o : r->outputs) std::filesystem::remove(run_dir_ / o.path);
        std::erase_if(stages_, [&](const auto& e) { return e.first == d; });
    }
}

void RunManifest::require(Stage stage) const {
    for (Stage up : upstream_of(stage)) {
        const auto* r = find(up);
        const std::string cmd = to_string(up);
        if (!r) {
            throw Error(ErrorKind::MissingArtifact,
                        std::string(to_string(stage)) + " needs the " + cmd + " stage: run `fmprog " + cmd + "` first");
        }
        for (const auto& o : r->outputs) {
            const auto file = run_dir_ / o.path;
            if (!std::filesystem::exists(file) || sha256_file(file) != o.sha256) {
                throw Error(ErrorKind::MissingArtifact,
                            o.path + " is missing or was modified: run `fmprog " + cmd + " --force` first");
            }
        }
    }
}

RunLock::RunLock(const std::filesystem::path& run_dir) : file_(run_dir / kFileName) {
    std::filesystem::create_directories(run_dir);
    std::FILE* f = std::fopen(file_.c_str(), "wx");
    if (!f) {
        throw Error(ErrorKind::Lock, "run directory " + run_dir.string() + " is locked (" + file_.string() +
                                         " exists); another fmprog process may be running");
    }
    std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
    std::fclose(f);
}

RunLock::~RunLock() {
    std::error_code ec;
    std::filesystem::remove(file_, ec);
}

std::vector<ArtifactRecord> hash_outputs(const std::filesystem::path& run_dir,
                                         const std::vector<std::filesystem::path>& files) {
    std::vector<ArtifactRecord> out;
    for (const auto& f : files) {
        const auto rel = f.is_absolute() ? std::filesystem::relative(f, run_dir) : f;
        out.push_back({rel.generic_string(), sha256_file(run_dir / rel)});
    }
    return out;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace fmprog::pipeline
