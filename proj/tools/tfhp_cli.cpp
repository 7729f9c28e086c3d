// Batch front end: tfhp_cli <ml-eval|hp|tfhp|gfhp|lemma-check> --config FILE [--seed N]
// [--out-dir DIR] [--threads N]. Exit codes: 0 pass, 1 gate failure, 2 config, 3 numeric.

#include "tfhp/experiments.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <thread>

namespace {

unsigned default_threads() {
    if (const char* env = std::getenv("THP_THREADS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (*end == '\0' && n > 0) {
            return static_cast<unsigned>(n);
        }
        std::cerr << "tfhp_cli: ignoring THP_THREADS=" << env << "\n";
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-changed Hawkes process moments: analytic formulas vs Monte Carlo"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    unsigned threads = 0;

    const std::pair<const char*, tfhp::Command> commands[] = {
        {"ml-eval", tfhp::Command::MlEval}, {"hp", tfhp::Command::Hp},
        {"tfhp", tfhp::Command::Tfhp},      {"gfhp", tfhp::Command::Gfhp},
        {"lemma-check", tfhp::Command::LemmaCheck},
    };
    const char* help[] = {
        "tabulate ml3 and phi",
        "classical Hawkes moments vs Monte Carlo",
        "tempered fractional Hawkes moments vs Monte Carlo",
        "general inverse-subordinator clock vs Monte Carlo",
        "bivariate clock transforms vs Monte Carlo",
    };
    std::vector<CLI::App*> subs;
    std::vector<CLI::Option*> seed_opts;
    for (std::size_t i = 0; i < std::size(commands); ++i) {
        auto* sub = app.add_subcommand(commands[i].first, help[i]);
        sub->add_option("--config", config_path, "JSON experiment config")->required();
        seed_opts.push_back(sub->add_option("--seed", seed, "overrides the config seed"));
        sub->add_option("--out-dir", out_dir, "directory for the CSV and JSON outputs");
        sub->add_option("--threads", threads, "worker threads (default THP_THREADS, then all cores)")
            ->check(CLI::PositiveNumber);
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : tfhp::kExitConfig;
    }

    std::size_t picked = 0;
    while (!subs[picked]->parsed()) {
        ++picked;
    }
    const tfhp::Command cmd = commands[picked].second;
    tfhp::RunOptions opts;
    opts.threads = threads > 0 ? threads : default_threads();
    if (seed_opts[picked]->count() > 0) {
        opts.seed = seed;
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        const auto config = tfhp::load_config(config_path);
        const auto result = tfhp::run_experiment(cmd, config, opts);
        tfhp::write_outputs(result, out_dir);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cerr << tfhp::command_name(cmd) << ": " << (result.pass ? "PASS" : "FAIL") << " ("
                  << result.csv_name << ", " << result.json_name << " in " << out_dir << "; " << secs << " s)\n";
        return result.pass ? tfhp::kExitPass : tfhp::kExitGateFail;
    } catch (const tfhp::ConfigError& e) {
        std::cerr << "tfhp_cli: " << e.what() << "\n";
        return tfhp::kExitConfig;
    } catch (const tfhp::ValidationError& e) {
        std::cerr << "tfhp_cli: " << config_path << ": " << e.what() << "\n";
        return tfhp::kExitConfig;
    } catch (const tfhp::NumericError& e) {
        std::cerr << "tfhp_cli: numeric failure in " << tfhp::command_name(cmd) << ": " << e.what() << "\n";
        return tfhp::kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "tfhp_cli: " << e.what() << "\n";
        return tfhp::kExitNumeric;
    }
}
