#pragma once

#include "fmprog/pipeline/config.hpp"
#include "fmprog/pipeline/manifest.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fmprog::pipeline {

struct RunContext {
    RunConfig config;
    std::filesystem::path run_dir;
    bool force = false;  // rerun even when the cached outputs are current
};

struct StageOutcome {
    Stage stage = Stage::Preprocess;
    bool cached = false;
    double seconds = 0.0;
    std::vector<std::string> outputs;  // relative to the run directory
    nlohmann::json summary;
};

/// Hash of the configuration blocks a stage reads (upstream blocks excluded).
std::string config_key(Stage stage, const RunConfig& config);

/// Runs one stage under the run-directory lock. Upstream stages must have completed with the current
/// configuration (MissingArtifact otherwise). A stage whose inputs and configuration are unchanged is
/// not recomputed unless `force` is set. A stage whose outputs change removes every downstream stage.
StageOutcome run_stage(Stage stage, const RunContext& context);

/// Tool version recorded in manifests and checkpoints.
const char* tool_version();

}  // namespace fmprog::pipeline
