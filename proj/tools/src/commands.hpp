#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "app_config.hpp"
#include "cltrust/dataset.hpp"

namespace cltrust::app {

struct Pipeline {
    DatasetSplit split;
    std::size_t dropped_rows = 0;
};

Pipeline load_pipeline(const AppConfig& config);

// Loads a saved model when `model_path` is set, otherwise trains one.
LinearClassifier obtain_model(const AppConfig& config, const DatasetSplit& split,
                              const std::optional<std::string>& model_path);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

struct TrainArgs {
    std::string out_dir = "artifacts";
};

struct SelectArgs {
    std::optional<std::string> model;
    std::string out = "cases.json";
};

struct SimulateArgs {
    std::optional<std::string> model;
    std::string out = "experiment.json";
};

struct MetricsArgs {
    std::string in;
    std::string out = "metrics.json";
};

struct ServeArgs {
    std::optional<std::string> model;
    std::optional<std::string> cases;
};

struct ReplayArgs {
    std::string in;
};

// Each returns the process exit status and reports progress on `log`.
int run_train(const AppConfig& config, const TrainArgs& args, std::ostream& log);
int run_select_cases(const AppConfig& config, const SelectArgs& args, std::ostream& log);
int run_simulate(const AppConfig& config, const SimulateArgs& args, std::ostream& log);
int run_metrics(const AppConfig& config, const MetricsArgs& args, std::ostream& log);
int run_serve(const AppConfig& config, const ServeArgs& args, std::ostream& log);
int run_replay(const AppConfig& config, const ReplayArgs& args, std::ostream& log);

}  // namespace cltrust::app
