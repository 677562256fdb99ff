// Drives the fmprog executable end to end on a synthetic fleet and checks exit codes and messages.

#include "fmprog/pipeline/manifest.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace fmprog;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& f) {
    std::ifstream in(f);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

CliRun fmprog_cli(const fs::path& work, const std::string& args) {
    const auto out = work / "stdout.txt", err = work / "stderr.txt";
    const std::string cmd = std::string(FMPROG_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        work = fixtures::scratch_dir(std::string("cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fixtures::FleetSpec spec;
        spec.units = 10;
        spec.min_life = 50;
        spec.max_life = 60;
        fixtures::write_fleet(work / "data", "FD900", fixtures::make_fleet(spec));
        write_config(10);
        run = work / "run";
    }

    void write_config(int umap_epochs) {
        std::ofstream(work / "run.ini") << "[dataset]\nid = FD900\nroot = " << (work / "data").string()
                                        << "\n[preprocess]\nntw = 10\n[umap]\nn_neighbors = 8\nepochs = " << umap_epochs
                                        << "\n[cluster]\nmodes = 2\nrestarts = 2\n"
                                        << "[train]\nepochs = 2\nhidden = 4,4\nfolds = 2\n";
    }

    CliRun cli(const std::string& verb, const std::string& extra = "") {
        return fmprog_cli(work, verb + " --config " + (work / "run.ini").string() + " --run-dir " + run.string() + " -q " +
                                    extra);
    }

    nlohmann::json manifest() {
        std::ifstream in(run / pipeline::RunManifest::kFileName);
        return nlohmann::json::parse(in);
    }

    fs::path work, run;
};

}  // namespace

TEST_F(Cli, MissingUpstreamExitsThreeAndNamesTheCommand) {
    const auto r = cli("evaluate");
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("run `fmprog train` first"), std::string::npos) << r.err;
}

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(fmprog_cli(work, "").code, 2);
    EXPECT_EQ(fmprog_cli(work, "fly").code, 2);
    std::ofstream(work / "bad.ini") << "[umap]\nneighbours = 3\n";
    const auto r = fmprog_cli(work, "preprocess --config " + (work / "bad.ini").string() + " --run-dir " + run.string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("unknown key umap.neighbours"), std::string::npos) << r.err;
}

TEST_F(Cli, FullPipelineThenCacheHit) {
    for (const char* verb : {"preprocess", "embed", "cluster", "train", "evaluate"}) {
        const auto r = cli(verb);
        ASSERT_EQ(r.code, 0) << verb << ": " << r.err;
        EXPECT_NE(r.out.find("done"), std::string::npos);
    }
    const auto metrics = nlohmann::json::parse(slurp(run / "evaluate/metrics.json"));
    EXPECT_GE(metrics.at("rmse").get<double>(), metrics.at("mae").get<double>());
    EXPECT_TRUE(metrics.contains("folds"));

    const auto again = cli("embed");
    EXPECT_EQ(again.code, 0);
    EXPECT_NE(again.out.find("cached"), std::string::npos);
    EXPECT_EQ(manifest()["stages"]["embed"]["cache_hits"], 1);
    EXPECT_EQ(manifest()["tool_version"], FMPROG_EXPECTED_VERSION);
}

TEST_F(Cli, ConfigChangeInvalidatesDownstream) {
    for (const char* verb : {"preprocess", "embed", "cluster"}) ASSERT_EQ(cli(verb).code, 0) << verb;
    write_config(20);
    const auto stale = cli("cluster");
    EXPECT_EQ(stale.code, 3);
    EXPECT_NE(stale.err.find("`fmprog embed`"), std::string::npos) << stale.err;
    ASSERT_EQ(cli("embed").code, 0);
    const auto m = manifest();
    EXPECT_TRUE(m["stages"].contains("embed"));
    EXPECT_FALSE(m["stages"].contains("cluster"));
    EXPECT_FALSE(fs::exists(run / "cluster/labels.csv"));
}

TEST_F(Cli, LockedRunDirectoryExitsSix) {
    fs::create_directories(run);
    std::ofstream(run / pipeline::RunLock::kFileName) << "12345\n";
    const auto r = cli("preprocess");
    EXPECT_EQ(r.code, 6);
    EXPECT_NE(r.err.find("locked"), std::string::npos) << r.err;
    fs::remove(run / pipeline::RunLock::kFileName);
    EXPECT_EQ(cli("preprocess").code, 0);
}

TEST_F(Cli, SeedFlagChangesTheEmbedding) {
    for (const char* verb : {"preprocess", "embed"}) ASSERT_EQ(cli(verb).code, 0);
    const auto first = slurp(run / "embed/embedding.csv");
    ASSERT_EQ(cli("embed", "--seed 5").code, 0);
    EXPECT_NE(slurp(run / "embed/embedding.csv"), first);
    ASSERT_EQ(cli("embed", "--seed 42").code, 0);
    EXPECT_EQ(slurp(run / "embed/embedding.csv"), first);
}
