#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef SUBDIFF_CLI
#error "SUBDIFF_CLI must point at the built command-line tool"
#endif

namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("subdiff_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + std::string(SUBDIFF_CLI) + " " + args + " >" +
                            (scratch() / "stdout.txt").string() + " 2>" + (scratch() / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = scratch() / name;
    std::ofstream(p) << text;
    return p;
}

const char* kSmall = R"({
  // small and fast
  "scenario": {"gamma_grid": [0.125, 0.25, 0.5]},
  "receivers": ["trispade"],
  "detector": {"h_grid": [3, 4], "n_trials": 40, "fa_trials": 10, "max_steps": 100000}
})";

}  // namespace

TEST(Cli, VerifyPassesOnDefaults) {
    EXPECT_EQ(run("verify"), 0) << slurp(scratch() / "stdout.txt");
    EXPECT_NE(slurp(scratch() / "stdout.txt").find("PASS"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitWithCode2) {
    const auto bad = write_config("bad.json", R"({"scenario": {"gamma": -1}})");
    EXPECT_EQ(run("entropy-sweep -q -c " + bad.string()), 2);
    EXPECT_NE(slurp(scratch() / "stderr.txt").find("scenario.gamma"), std::string::npos);
    EXPECT_EQ(run("entropy-sweep -c " + (scratch() / "missing.json").string()), 2);
    EXPECT_EQ(run("no-such-command"), 2);
    const auto typo = write_config("typo.json", R"({"detector": {"n_trails": 5}})");
    EXPECT_EQ(run("threshold-sweep -c " + typo.string()), 2);
}

TEST(Cli, NumericalErrorsExitWithCode3) {
    const auto same = write_config("same.json", R"({"scenario": {"preset": "identical"}})");
    EXPECT_EQ(run("threshold-sweep -q -c " + same.string() + " -o " + (scratch() / "same").string()), 3);
}

TEST(Cli, VerifyFailureExitsWithCode4) {
    // Post-change object has extent along y where the pre-change one has none.
    const auto cfg = write_config("singular.json", R"({"scenario": {
        "pre": {"kind": "points", "points": [[-0.3, 0], [0.3, 0]]},
        "post": {"kind": "points", "points": [[0, -0.3], [0, 0.3]]}}})");
    EXPECT_EQ(run("verify -c " + cfg.string()), 4);
    EXPECT_NE(slurp(scratch() / "stdout.txt").find("FAIL"), std::string::npos);
}

TEST(Cli, WritesCsvSvgAndJson) {
    const auto cfg = write_config("small.json", kSmall);
    const fs::path out = scratch() / "out";
    ASSERT_EQ(run("entropy-sweep -q -c " + cfg.string() + " -o " + out.string()), 0);
    for (const char* f : {"entropy_sweep.csv", "entropy_sweep.svg", "entropy_sweep.json"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    const std::string json = slurp(out / "entropy_sweep.json");
    EXPECT_NE(json.find("\"config\""), std::string::npos);
    EXPECT_NE(json.find("\"log_slopes\""), std::string::npos);
    ASSERT_EQ(run("latency-ensemble -q -c " + cfg.string() + " -o " + out.string() + " --trace " +
                  (out / "trace.csv").string()),
              0);
    EXPECT_EQ(slurp(out / "trace.csv").rfind("# CUSUM trace", 0), 0u);
}

TEST(Cli, SeedAndWorkerOverrides) {
    const auto cfg = write_config("small2.json", kSmall);
    const fs::path a = scratch() / "a", b = scratch() / "b", c = scratch() / "c";
    ASSERT_EQ(run("threshold-sweep -q -c " + cfg.string() + " -o " + a.string() + " --workers 1 --seed 5"), 0);
    ASSERT_EQ(run("threshold-sweep -q -c " + cfg.string() + " -o " + b.string() + " --seed 5", "SUBDIFF_WORKERS=8"), 0);
    ASSERT_EQ(run("threshold-sweep -q -c " + cfg.string() + " -o " + c.string() + " --seed 6"), 0);
    EXPECT_EQ(slurp(a / "threshold_sweep.csv"), slurp(b / "threshold_sweep.csv"));
    EXPECT_NE(slurp(a / "threshold_sweep.csv"), slurp(c / "threshold_sweep.csv"));
    EXPECT_NE(slurp(a / "threshold_sweep.json").find("\"master_seed\": 5"), std::string::npos);
}
