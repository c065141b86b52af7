#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "app_config.hpp"
#include "commands.hpp"
#include "cltrust/error.hpp"

namespace {

std::string one_line(std::string text) {
    for (auto& c : text) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return text;
}

int report(const std::string& code, const std::string& message) {
    std::cerr << "error code=" << code << " message=" << one_line(message) << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace cltrust;
    using namespace cltrust::app;

    CLI::App cli{"Correctness-likelihood decision support toolkit"};
    cli.require_subcommand(1, 1);
    cli.fallthrough();

    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> data_path;
    std::vector<std::string> overrides;
    cli.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    cli.add_option("--seed", seed, "Seed for the subcommand's random stream");
    cli.add_option("--data", data_path, "Dataset CSV");
    cli.add_option("--set", overrides, "Override a config key (section.key=value)");
    bool print_config = false;
    cli.add_flag("--print-config", print_config, "Print the effective config and exit");

    TrainArgs train_args;
    auto* train_cmd = cli.add_subcommand("train", "Train the AI model and write the calibration report");
    train_cmd->add_option("--out", train_args.out_dir, "Output directory");

    SelectArgs select_args;
    auto* select_cmd = cli.add_subcommand("select-cases", "Select the task cases for both batches");
    select_cmd->add_option("--model", select_args.model, "Model JSON from train")->check(CLI::ExistingFile);
    select_cmd->add_option("--out", select_args.out, "Case set JSON");

    SimulateArgs sim_args;
    auto* sim_cmd = cli.add_subcommand("simulate", "Run the synthetic-agent experiment");
    sim_cmd->add_option("--model", sim_args.model, "Model JSON from train")->check(CLI::ExistingFile);
    sim_cmd->add_option("--out", sim_args.out, "Experiment result JSON");

    MetricsArgs metrics_args;
    auto* metrics_cmd = cli.add_subcommand("metrics", "Compute per-condition metrics from exported logs");
    metrics_cmd->add_option("--in", metrics_args.in, "Export or trial-log JSON")->required()->check(CLI::ExistingFile);
    metrics_cmd->add_option("--out", metrics_args.out, "Metrics report JSON");

    ServeArgs serve_args;
    std::optional<int> port;
    auto* serve_cmd = cli.add_subcommand("serve", "Run the session service over HTTP");
    serve_cmd->add_option("--model", serve_args.model, "Model JSON from train")->check(CLI::ExistingFile);
    serve_cmd->add_option("--cases", serve_args.cases, "Case set JSON from select-cases")->check(CLI::ExistingFile);
    serve_cmd->add_option("--port", port, "Listening port");

    ReplayArgs replay_args;
    auto* replay_cmd = cli.add_subcommand("replay", "Replay an export and verify its state hashes");
    replay_cmd->add_option("--in", replay_args.in, "Export JSON")->required()->check(CLI::ExistingFile);

    try {
        cli.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return cli.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error code=usage message=" << one_line(e.what()) << "\n";
        return 2;
    }

    try {
        AppConfig config = config_path ? load_config(*config_path) : default_config();
        apply_overrides(config, overrides);
        if (data_path) config.data.path = *data_path;
        if (port) config.serve.port = *port;
        if (seed) {
            if (*train_cmd) config.data.split_seed = *seed;
            if (*select_cmd || *serve_cmd) config.selection_seed = *seed;
            if (*sim_cmd) config.experiment.seed = *seed;
        }
        validate(config);
        if (print_config) {
            std::cout << render_config(config);
            return 0;
        }
        if (*train_cmd) return run_train(config, train_args, std::cout);
        if (*select_cmd) return run_select_cases(config, select_args, std::cout);
        if (*sim_cmd) return run_simulate(config, sim_args, std::cout);
        if (*metrics_cmd) return run_metrics(config, metrics_args, std::cout);
        if (*serve_cmd) return run_serve(config, serve_args, std::cout);
        if (*replay_cmd) return run_replay(config, replay_args, std::cout);
    } catch (const Error& e) {
        return report(std::string(to_string(e.code())), e.what());
    } catch (const std::exception& e) {
        return report("internal", e.what());
    }
    return 1;
}
