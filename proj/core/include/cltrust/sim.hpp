#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cltrust/ai_model.hpp"
#include "cltrust/cl_engine.hpp"
#include "cltrust/human_model.hpp"
#include "cltrust/metrics.hpp"
#include "cltrust/strategy.hpp"

namespace cltrust {

struct AgentParams {
    double noise_rate = 0.2;
    double revision_fidelity = 0.75;
    // Probability that a leaf of the agent's policy holds the wrong majority.
    double misconception_rate = 0.15;
    std::size_t max_depth = 3;
    double stop_probability = 0.25;
    std::size_t min_rows = 20;
    std::size_t label_sample = 3000;
};

struct SyntheticAgent {
    DecisionTreeModel true_tree;
    RuleSet true_ruleset;
    double noise_rate = 0.0;
    double revision_fidelity = 0.0;
    std::uint64_t seed = 0;

    Label policy(const TaskInstance& instance) const;
};

// Random policy tree grown on a sample of training rows and converted to rules.
SyntheticAgent make_agent(const AgentParams& params, const DatasetSplit& split, std::uint64_t seed);
// Wraps a hand-written policy tree.
SyntheticAgent make_agent(DecisionTreeModel tree, const FeatureSchema& schema, double noise_rate,
                          double revision_fidelity, std::uint64_t seed);

// `stream` separates independent decision sequences of the same agent.
std::vector<DecisionRecord> simulate_decisions(const SyntheticAgent& agent, std::span<const TaskInstance> cases,
                                               std::uint64_t stream = 0);

// Each induced rule is, with probability revision_fidelity, replaced by its
// intersections with the agent's true rules.
RuleSet simulate_editing(const SyntheticAgent& agent, const RuleSet& induced, const FeatureSchema& schema);

struct RelianceConfig {
    double adopt_shown = 0.8;
    double switch_on_cue = 0.6;
};

enum class CaseSource { Selector, RandomSample };

std::string_view to_string(CaseSource s);
CaseSource case_source_from_string(std::string_view text);

struct ExperimentConfig {
    std::size_t agents = 30;
    std::size_t replications = 20;
    std::uint64_t seed = 7;
    double noise_min = 0.1, noise_max = 0.4;
    double fidelity_min = 0.5, fidelity_max = 1.0;
    double misconception_min = 0.0, misconception_max = 0.3;
    AgentParams agent_template;
    TreeConfig tree{3, 2};
    ClConfig cl;
    double confidence_threshold = 0.7;
    CaseSource case_source = CaseSource::Selector;
    SelectionConfig selection;
    RelianceConfig reliance;
    std::size_t threads = 1;
};

void validate(const ExperimentConfig& config);

struct SimCases {
    std::vector<SelectedCase> batch1;
    std::vector<SelectedCase> batch2;
    // Nearest training neighbors of every batch-2 case.
    std::vector<std::vector<Neighbor>> neighbors2;
};

// Case sets are drawn with `seed`; every replication draws its own.
SimCases prepare_cases(const ExperimentConfig& config, const DatasetSplit& split, const LinearClassifier& model,
                       std::uint64_t seed);

struct AgentOutcome {
    std::optional<double> cl_router_recall;
    std::optional<double> confidence_router_recall;
    double mean_cl = 0.0;
    double accuracy = 0.0;  // independent batch-2 accuracy
    std::vector<TrialLog> trials;
    std::vector<std::string> violations;
};

AgentOutcome run_agent(const SyntheticAgent& agent, const SimCases& cases, const DatasetSplit& split,
                       const ExperimentConfig& config, const std::string& name);

struct ReplicationResult {
    std::uint64_t seed = 0;
    std::optional<double> cl_router_recall;
    std::optional<double> confidence_router_recall;
    std::optional<double> pearson_r;
    std::vector<double> agent_mean_cl;
    std::vector<double> agent_accuracy;
    std::vector<MetricsReport> reports;
    std::size_t transcript_violations = 0;
};

struct Spread {
    std::optional<double> mean;
    std::optional<double> stddev;
    std::size_t n = 0;
};

struct ExperimentResult {
    std::vector<ReplicationResult> replications;
    Spread cl_router_recall;
    Spread confidence_router_recall;
    Spread pearson_r;
    // Replications where the CL router's recall strictly beats the confidence router's.
    std::size_t cl_router_wins = 0;
    std::size_t transcript_violations = 0;
};

ReplicationResult run_replication(const ExperimentConfig& config, const SimCases& cases,
                                  const DatasetSplit& split, std::uint64_t seed);
ReplicationResult run_replication(const ExperimentConfig& config, const DatasetSplit& split,
                                  const LinearClassifier& model, std::uint64_t seed);
ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetSplit& split,
                                const LinearClassifier& model);

Spread spread(std::span<const std::optional<double>> values);

nlohmann::json to_json(const ExperimentResult& r);
std::string render_summary(const ExperimentResult& r);

}  // namespace cltrust
