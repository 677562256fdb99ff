// fmprog: staged failure-mode prognostics pipeline.
//
//   fmprog preprocess --config run.ini --run-dir runs/fd003
//   fmprog embed | cluster | train | evaluate | reproduce   (same flags)

#include "fmprog/error.hpp"
#include "fmprog/pipeline/stages.hpp"

#include <CLI11.hpp>
#include <omp.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <optional>

namespace {

struct Options {
    std::string config;
    std::string run_dir = "run";
    std::optional<std::uint64_t> seed;
    bool force = false;
    int threads = 0;
    bool quiet = false;
};

int run(fmprog::pipeline::Stage stage, const Options& opt) {
    using namespace fmprog::pipeline;
    RunContext ctx;
    if (!opt.config.empty()) ctx.config = load_config(opt.config);
    if (opt.seed) ctx.config.set_seed(*opt.seed);
    ctx.run_dir = opt.run_dir;
    ctx.force = opt.force;
    if (opt.threads > 0) omp_set_num_threads(opt.threads);
    const auto out = run_stage(stage, ctx);
    std::cout << to_string(stage) << ": " << (out.cached ? "cached" : "done");
    if (!out.cached) std::cout << " in " << out.seconds << "s";
    std::cout << '\n';
    for (const auto& f : out.outputs) std::cout << "  " << f << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    using fmprog::pipeline::Stage;
    CLI::App app{"Failure-mode-aware remaining-useful-life pipeline"};
    app.set_version_flag("--version", fmprog::pipeline::tool_version());
    app.require_subcommand(1);

    Options opt;
    app.add_option("--config", opt.config, "INI configuration file")->check(CLI::ExistingFile);
    app.add_option("--run-dir", opt.run_dir, "Directory holding the stage outputs and run_manifest.json");
    app.add_option("--seed", opt.seed, "Overrides every seed in the configuration");
    app.add_flag("--force", opt.force, "Rerun the stage even when its outputs are current");
    app.add_option("--threads", opt.threads, "OpenMP threads (default: runtime choice)")->check(CLI::NonNegativeNumber);
    app.add_flag("-q,--quiet", opt.quiet, "Only warnings and errors on the log");

    const std::pair<Stage, const char*> verbs[] = {
        {Stage::Preprocess, "Parse, filter and normalise the raw files"},
        {Stage::Embed, "Project the training cycles to the low-dimensional space"},
        {Stage::Cluster, "Group the degradation trajectories into failure modes"},
        {Stage::Train, "Fit the joint classifier and per-mode regressors"},
        {Stage::Evaluate, "Score the final model on the test units"},
        {Stage::Reproduce, "Cross-validate every configured loss-weight setting"},
    };
    std::optional<Stage> chosen;
    app.fallthrough();  // global flags are accepted after the verb too
    for (const auto& [stage, help] : verbs) {
        app.add_subcommand(fmprog::pipeline::to_string(stage), help)->callback([&chosen, stage = stage] { chosen = stage; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    spdlog::set_level(opt.quiet ? spdlog::level::warn : spdlog::level::info);

    try {
        return run(*chosen, opt);
    } catch (const fmprog::Error& e) {
        std::cerr << "fmprog: " << fmprog::to_string(e.kind()) << ": " << e.what() << '\n';
        return fmprog::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "fmprog: " << e.what() << '\n';
        return 1;
    }
}
