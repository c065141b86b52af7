#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cltrust/ai_model.hpp"
#include "cltrust/cl_engine.hpp"
#include "cltrust/human_model.hpp"
#include "cltrust/service.hpp"
#include "cltrust/sim.hpp"

namespace cltrust::app {

struct DataSettings {
    std::string path = "data/adult.csv";
    double train_fraction = 0.7;
    std::uint64_t split_seed = 42;
    bool normalize = true;
};

struct ServeSettings {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir = "sessions";
};

// Every tunable constant of the pipeline, shared by all subcommands.
struct AppConfig {
    DataSettings data;
    TrainConfig train;
    double calibration_bin_width = 0.1;
    SelectionConfig selection;
    std::uint64_t selection_seed = 42;
    ClConfig cl;
    double confidence_threshold = 0.7;
    TreeConfig tree{3, 2};
    ExperimentConfig experiment;
    ServeSettings serve;
    bool allow_duplicate_participants = false;

    ExperimentConfig experiment_config() const;
    ServiceConfig service_config() const;
};

AppConfig default_config();

// Reads an INI file; unknown sections or keys are rejected.
AppConfig load_config(const std::string& path);
AppConfig parse_config(const std::string& text);

// Applies "section.key=value" overrides on top of an existing config.
void apply_overrides(AppConfig& config, const std::vector<std::string>& assignments);

std::string render_config(const AppConfig& config);

void validate(const AppConfig& config);

}  // namespace cltrust::app
