#pragma once

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fmprog::pipeline {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& file);

/// Stages in dependency order. `reproduce` hangs off `cluster`.
enum class Stage { Preprocess, Embed, Cluster, Train, Evaluate, Reproduce };

const char* to_string(Stage stage);
std::optional<Stage> stage_from_string(std::string_view name);

/// Direct upstream stages.
std::vector<Stage> upstream_of(Stage stage);

/// Every stage that transitively depends on `stage`.
std::vector<Stage> downstream_of(Stage stage);

struct ArtifactRecord {
    std::string path;    // relative to the run directory
    std::string sha256;
};

struct StageRecord {
    std::string key;  // hash of the stage's configuration and its upstream keys
    std::vector<ArtifactRecord> outputs;
    double seconds = 0.0;
    std::string completed_at;  // UTC, ISO 8601
    int cache_hits = 0;
    nlohmann::json summary;    // small stage-specific facts (unit counts, chosen modes, metrics)
};

/// run_manifest.json inside a run directory.
class RunManifest {
public:
    static constexpr const char* kFileName = "run_manifest.json";

    explicit RunManifest(std::filesystem::path run_dir);

    /// Reads the manifest if present; a fresh manifest otherwise.
    static RunManifest load(const std::filesystem::path& run_dir);
    void save() const;

    const std::filesystem::path& run_dir() const { return run_dir_; }
    const StageRecord* find(Stage stage) const;

    /// True when the stage is recorded with this key and every output still has its recorded hash.
    bool is_current(Stage stage, const std::string& key) const;

    /// Records a completed stage. Downstream entries and their files are removed when the key or any
    /// output hash changed.
    void record(Stage stage, StageRecord record);

    void note_cache_hit(Stage stage);

    /// Removes the entries of every downstream stage and deletes their output files.
    void invalidate_downstream(Stage stage);

    /// Throws MissingArtifact naming the command to run when an upstream stage is absent or its
    /// outputs were modified.
    void require(Stage stage) const;

    std::string config_hash;
    std::string tool_version;

    nlohmann::json to_json() const;

private:
    std::filesystem::path run_dir_;
    std::vector<std::pair<Stage, StageRecord>> stages_;
};

/// Exclusive lock on a run directory (a `.lock` file created with exclusive mode).
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

    static constexpr const char* kFileName = ".lock";

private:
    std::filesystem::path file_;
};

/// Hashes recorded for a list of files under the run directory.
std::vector<ArtifactRecord> hash_outputs(const std::filesystem::path& run_dir,
                                         const std::vector<std::filesystem::path>& files);

std::string utc_now();

}  // namespace fmprog::pipeline
