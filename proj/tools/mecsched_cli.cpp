// Command-line front end for the MEC scheduling experiments.
//
//   mecsched run   --config FILE [--seed N] [--out DIR] [--override key=value ...]
//   mecsched eval  --weights FILE --config FILE [--out DIR] [--override key=value ...]
//   mecsched sweep --param KEY --values V1,V2,... --config FILE [--out DIR] [--override ...]
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mecsched/config.hpp"
#include "mecsched/experiment.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct CommonArgs {
    std::string config;
    std::string out;
    std::vector<std::string> overrides;
    int jobs = 1;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "Experiment config file (key = value lines)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out, "Output directory (overrides out_dir)");
    cmd->add_option("--override", args.overrides, "Extra key=value settings")->take_all();
    cmd->add_option("--jobs", args.jobs, "Seeds to run concurrently")->check(CLI::PositiveNumber);
    cmd->add_flag("--quiet", args.quiet, "Suppress progress output");
}

mecsched::ExperimentConfig resolve(const CommonArgs& args, std::vector<std::string> extra = {}) {
    std::vector<std::string> overrides = args.overrides;
    if (!args.out.empty()) overrides.push_back("out_dir=" + args.out);
    overrides.insert(overrides.end(), extra.begin(), extra.end());
    return mecsched::load_config(args.config, overrides);
}

std::ostream* progress(const CommonArgs& args) { return args.quiet ? nullptr : &std::clog; }

void report(const mecsched::ExperimentConfig& cfg, const std::vector<mecsched::SeedResult>& results) {
    const auto stats = mecsched::eval_reward(results);
    std::cout << cfg.label << ": eval mean reward " << stats.mean << " +/- " << stats.stderr_
              << " over " << results.size() << " seed(s); outputs in " << cfg.out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete-time MEC job scheduling with training-cost-aware DDQN"};
    app.require_subcommand(1);

    CommonArgs run_args;
    long long seed = -1;
    auto* run_cmd = app.add_subcommand("run", "Train and evaluate one configuration");
    add_common(run_cmd, run_args);
    run_cmd->add_option("--seed", seed, "Run a single seed instead of the configured list");

    CommonArgs eval_args;
    std::string weights;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate saved policy weights without training");
    add_common(eval_cmd, eval_args);
    eval_cmd->add_option("--weights", weights, "Policy weights file")->required();

    CommonArgs sweep_args;
    std::string param;
    std::string values;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run one configuration per parameter value");
    add_common(sweep_cmd, sweep_args);
    sweep_cmd->add_option("--param", param, "Config key to vary")->required();
    sweep_cmd->add_option("--values", values, "Comma-separated values")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (*run_cmd) {
            std::vector<std::string> extra;
            if (seed >= 0) extra.push_back("seeds=" + std::to_string(seed));
            const auto cfg = resolve(run_args, extra);
            report(cfg, mecsched::run_experiment(cfg, run_args.jobs, progress(run_args)));
        } else if (*eval_cmd) {
            auto cfg = resolve(eval_args, {"init_weights=" + weights, "n_train=0"});
            if (!cfg.uses_agent()) throw mecsched::ConfigError("eval needs a learning policy, not sjf");
            report(cfg, mecsched::run_experiment(cfg, eval_args.jobs, progress(eval_args)));
        } else if (*sweep_cmd) {
            const auto base = resolve(sweep_args);
            std::vector<std::string> items;
            std::stringstream ss(values);
            for (std::string item; std::getline(ss, item, ',');) {
                if (!item.empty()) items.push_back(item);
            }
            if (items.empty()) throw mecsched::ConfigError("--values is empty");
            std::filesystem::create_directories(base.out_dir);
            std::ofstream summary(std::filesystem::path(base.out_dir) / "sweep_summary.csv");
            summary << param << ",eval_mean_reward,eval_stderr\n";
            for (const auto& item : items) {
                const std::string dir =
                    (std::filesystem::path(base.out_dir) / (param + "_" + item)).string();
                const auto cfg = resolve(sweep_args, {param + "=" + item, "out_dir=" + dir});
                const auto results = mecsched::run_experiment(cfg, sweep_args.jobs, progress(sweep_args));
                report(cfg, results);
                const auto stats = mecsched::eval_reward(results);
                summary << item << ',' << mecsched::format_exact(stats.mean) << ','
                        << mecsched::format_exact(stats.stderr_) << '\n';
                summary.flush();
            }
        }
    } catch (const mecsched::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return 0;
}
