#include "tfhp/experiments.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

using namespace tfhp;
namespace fs = std::filesystem;

namespace {

std::size_t error_line(const std::string& text) {
    try {
        parse_config(text, "t.json");
    } catch (const ConfigError& e) {
        return e.line();
    }
    return 0;
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("tfhp_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

int run_cli(const std::string& args) {
    const std::string cmd = std::string(TFHP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesShippedConfigs) {
    for (const auto& entry : fs::directory_iterator(fs::path(TFHP_SOURCE_DIR) / "configs")) {
        EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
    }
    const auto c = load_config(std::string(TFHP_SOURCE_DIR) + "/configs/tfhp_acceptance.json");
    ASSERT_TRUE(c.hawkes.has_value());
    EXPECT_EQ(c.hawkes->kappa, 2.0);
    EXPECT_EQ(c.times, (std::vector<double>{0.5, 1.0, 2.0, 5.0}));
    EXPECT_FALSE(c.delta.has_value());
    EXPECT_EQ(c.sub->family(), "tempered_stable");
}

TEST(Config, UnknownKeyReportsItsLine) {
    const std::string text = "{\n  \"times\": [1],\n  \"n_paths\": 1000,\n  \"npaths\": 5\n}\n";
    EXPECT_EQ(error_line(text), 4u);
    const std::string nested =
        "{\n  \"hawkes\": {\"theta\": 1, \"kappa\": 2, \"eta\": 1, \"lambda0\": 2,\n"
        "    \"marks\": {\"law\": \"deterministic\", \"value\": 0.5, \"extra\": 1}}\n}\n";
    EXPECT_EQ(error_line(nested), 3u);
}

TEST(Config, MalformedJsonReportsLine) {
    EXPECT_EQ(error_line("{\n  \"times\": [1,\n  2,,\n}"), 3u);
}

TEST(Config, ValueChecks) {
    EXPECT_EQ(error_line("{\"times\": [1, 0.5]}"), 1u);
    EXPECT_EQ(error_line("{\n\"pairs\": [[1, 0.5]]}"), 2u);
    EXPECT_EQ(error_line("{\n\n\"n_paths\": 10}"), 3u);
    EXPECT_EQ(error_line("{\"delta\": \"often\"}"), 1u);
    EXPECT_EQ(error_line("{\"delta\": -1}"), 1u);
    EXPECT_EQ(error_line("{\"inversion_order\": 13}"), 1u);
    EXPECT_EQ(error_line("{\"lemma41_variant\": \"other\"}"), 1u);
    EXPECT_EQ(error_line("{\"subordinator\": {\"family\": \"tempered_stable\", \"beta\": 0.7}}"), 1u);
    EXPECT_EQ(error_line("{\"output\": {\"csv\": \"../x.csv\", \"json\": \"x.json\"}}"), 1u);
    EXPECT_EQ(error_line("{\"seed\": 5}"), 0u);
}

TEST(Config, SubordinatorFamilies) {
    auto sub = [](const std::string& body) { return *parse_config("{\"subordinator\": " + body + "}", "t").sub; };
    EXPECT_EQ(sub("{\"family\": \"stable\", \"beta\": 0.5}").family(), "stable");
    EXPECT_EQ(sub("{\"family\": \"gamma\", \"p\": 1, \"q\": 2}").family(), "gamma");
    EXPECT_EQ(sub("{\"family\": \"inverse_gaussian\", \"delta\": 1, \"g\": 2}").family(), "inverse_gaussian");
    const auto c = sub("{\"family\": \"custom\", \"a\": 0, \"b\": 1, \"atoms\": [[0.5, 2]]}");
    EXPECT_DOUBLE_EQ(mean_rate(c), 2.0);
}

TEST(Experiments, MlEvalRows) {
    const auto cfg = load_config(std::string(TFHP_SOURCE_DIR) + "/configs/ml_eval.json");
    const auto res = run_experiment(Command::MlEval, cfg);
    EXPECT_TRUE(res.pass);
    EXPECT_EQ(res.csv_name, "ml-eval.csv");
    EXPECT_EQ(res.csv.rfind("function,p1,p2,p3,p4,value,error_estimate,source\n", 0), 0u);
    EXPECT_NE(res.csv.find("ml3,1,1,1,1,2.718281828"), std::string::npos);
    EXPECT_NE(res.csv.find("phi,0.7,0.5,1.5,0,1,"), std::string::npos);
}

TEST(Experiments, MissingBlocksAreConfigErrors) {
    const auto cfg = parse_config("{\"times\": [1]}", "t.json");
    EXPECT_THROW(run_experiment(Command::Hp, cfg), ConfigError);
    EXPECT_THROW(run_experiment(Command::Tfhp, cfg), ConfigError);
    EXPECT_THROW(run_experiment(Command::MlEval, cfg), ConfigError);
}

TEST(Experiments, HpReportFormat) {
    auto cfg = load_config(std::string(TFHP_SOURCE_DIR) + "/configs/hp_acceptance.json");
    cfg.n_paths = 2000;
    const auto res = run_experiment(Command::Hp, cfg);
    EXPECT_EQ(res.csv.rfind("quantity,s,t,analytic,estimate,se,z,source\n", 0), 0u);
    EXPECT_NE(res.csv.find("\nmean,,0.5,"), std::string::npos);
    EXPECT_NE(res.csv.find("\ncovariance,0.5,1,"), std::string::npos);
    EXPECT_EQ(res.summary["command"], "hp");
    EXPECT_TRUE(res.summary.contains("pass"));
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("exit");
    const std::string src = TFHP_SOURCE_DIR;
    EXPECT_EQ(run_cli("ml-eval --config " + src + "/configs/ml_eval.json --out-dir " + dir.string()), 0);
    EXPECT_TRUE(fs::exists(dir / "ml-eval.csv"));
    EXPECT_TRUE(fs::exists(dir / "ml-eval_summary.json"));

    // unknown key and malformed JSON: no outputs
    write(dir / "bad.json", "{\n  \"times\": [1],\n  \"bogus\": 1\n}\n");
    const auto out = dir / "bad_out";
    EXPECT_EQ(run_cli("hp --config " + (dir / "bad.json").string() + " --out-dir " + out.string()), 2);
    EXPECT_FALSE(fs::exists(out));
    write(dir / "broken.json", "{\"times\": [1,}");
    EXPECT_EQ(run_cli("hp --config " + (dir / "broken.json").string() + " --out-dir " + out.string()), 2);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_EQ(run_cli("hp --config " + (dir / "missing.json").string()), 2);
    EXPECT_EQ(run_cli("hp"), 2);
    EXPECT_EQ(run_cli("frobnicate --config x"), 2);

    // a step so coarse the rejection sampler refuses it
    write(dir / "numeric.json",
          "{\"hawkes\": {\"theta\": 1, \"kappa\": 2, \"eta\": 1, \"lambda0\": 2,"
          " \"marks\": {\"law\": \"deterministic\", \"value\": 0.5}},"
          " \"subordinator\": {\"family\": \"tempered_stable\", \"beta\": 0.5, \"nu\": 100},"
          " \"times\": [1], \"n_paths\": 100, \"delta\": 5}");
    EXPECT_EQ(run_cli("tfhp --config " + (dir / "numeric.json").string() + " --out-dir " + out.string()), 3);
}

TEST(Cli, GateFailureExitsOne) {
    // step so coarse the clock bias dominates
    const auto dir = scratch("gate");
    write(dir / "coarse.json",
          "{\"subordinator\": {\"family\": \"tempered_stable\", \"beta\": 0.7, \"nu\": 0.5},"
          " \"gamma\": 1.5, \"pairs\": [[0.5, 1]], \"n_paths\": 20000, \"seed\": 3, \"delta\": 0.4}");
    EXPECT_EQ(run_cli("lemma-check --config " + (dir / "coarse.json").string() + " --out-dir " + dir.string()), 1);
    EXPECT_TRUE(fs::exists(dir / "lemma-check.csv"));
}
