#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cltrust/dataset.hpp"

namespace cltrust {

struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t iterations = 2000;
    double l2 = 1e-4;
    std::size_t checkpoint_every = 100;
};

struct LinearClassifier {
    std::vector<double> weights;
    double bias = 0.0;
    std::size_t iterations = 0;
    double final_loss = 0.0;
    // Training log-loss at every checkpoint, first entry at iteration 0.
    std::vector<double> loss_checkpoints;

    double logit(std::span<const double> x) const;
    Label predict_label(std::span<const double> x) const;
};

struct AiPrediction {
    Label label = Label::AtMost50K;
    double confidence = 0.5;
    double probability_positive = 0.5;
};

AiPrediction prediction_from_probability(double probability_positive);

// Full-batch gradient descent on L2-regularised log-loss; weights start at 0.
LinearClassifier train(const DatasetSplit& split, const TrainConfig& config = {});
LinearClassifier train(std::span<const EncodedVector> x, std::span<const Label> y,
                       const TrainConfig& config = {});

AiPrediction predict(const LinearClassifier& model, std::span<const double> encoded);
AiPrediction predict(const LinearClassifier& model, const TaskInstance& instance,
                     const DatasetSplit& split);

struct CalibrationBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double mean_confidence = 0.0;
    double accuracy = 0.0;
};

struct CalibrationReport {
    std::vector<CalibrationBin> bins;
    double expected_calibration_error = 0.0;
    std::size_t total = 0;
};

struct ScoredOutcome {
    double confidence = 0.5;
    bool correct = false;
};

// Bins partition [0.5, 1.0]; the last bin is closed at 1.0.
CalibrationReport calibration_report(std::span<const ScoredOutcome> outcomes, double bin_width);
CalibrationReport calibration_report(const LinearClassifier& model, const DatasetSplit& split,
                                     std::span<const TaskInstance> instances, double bin_width);

struct FeatureContribution {
    std::string feature;
    double log_odds = 0.0;
};

struct Explanation {
    std::vector<FeatureContribution> contributions;
    double base = 0.0;
};

// Exact per-feature log-odds decomposition of the linear model.
Explanation explain(const LinearClassifier& model, const TaskInstance& instance,
                    const DatasetSplit& split);

struct SelectionConfig {
    double confidence_threshold = 0.7;  // confidence >= threshold is high
    std::size_t batches = 2;
    std::size_t low_per_batch = 10;
    std::size_t low_correct_per_batch = 6;
    double low_mean = 0.6;
    std::size_t high_per_batch = 10;
    std::size_t high_correct_per_batch = 8;
    double high_mean = 0.8;
    double mean_tolerance = 0.03;
    std::size_t max_restarts = 10000;
    std::size_t swaps_per_restart = 400;
    double common_value_share = 0.05;
};

struct CandidateCase {
    TaskInstance instance;
    AiPrediction ai;
    bool ai_correct() const { return ai.label == instance.label; }
};

struct SelectedCase {
    TaskInstance instance;
    AiPrediction ai;
    bool ai_correct = false;
};

struct FeatureCoverage {
    std::string feature;
    std::size_t common_values = 0;
    std::size_t covered = 0;
};

struct TaskCaseSet {
    std::vector<std::vector<SelectedCase>> batches;
    std::vector<FeatureCoverage> coverage;
    std::size_t restarts_used = 0;

    std::vector<SelectedCase> all() const;
};

TaskCaseSet select_task_cases(std::span<const CandidateCase> pool, const FeatureSchema& schema,
                              const SelectionConfig& config, std::uint64_t seed);
TaskCaseSet select_task_cases(const LinearClassifier& model, const DatasetSplit& split,
                              const SelectionConfig& config, std::uint64_t seed);

// Every constraint the selector must satisfy; empty when the set is valid.
std::vector<std::string> check_task_case_set(const TaskCaseSet& set, const SelectionConfig& config);

nlohmann::json model_to_json(const LinearClassifier& model, const DatasetSplit& split);
// Restores the model and the encoding statistics it was trained against.
std::pair<LinearClassifier, EncodingStats> model_from_json(const nlohmann::json& j,
                                                           const FeatureSchema& schema);

nlohmann::json to_json(const AiPrediction& p);
nlohmann::json to_json(const CalibrationReport& r);
nlohmann::json to_json(const Explanation& e);
nlohmann::json to_json(const TaskCaseSet& set, const FeatureSchema& schema);
nlohmann::json instance_to_json(const TaskInstance& t, const FeatureSchema& schema);
TaskInstance instance_from_json(const nlohmann::json& j, const FeatureSchema& schema);
AiPrediction prediction_from_json(const nlohmann::json& j);
TaskCaseSet task_case_set_from_json(const nlohmann::json& j, const FeatureSchema& schema);

}  // namespace cltrust
