#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cltrust/dataset.hpp"
#include "cltrust/human_model.hpp"

namespace cltrust {

enum class Side { Human, Ai };
enum class Higher { Human, Ai, Tie };
enum class TiePolicy { HumanFirst, AiFirst };

std::string_view to_string(Side s);
std::string_view to_string(Higher h);
std::string_view to_string(TiePolicy p);
Side side_from_string(std::string_view text);
Higher higher_from_string(std::string_view text);
TiePolicy tie_policy_from_string(std::string_view text);

struct ClConfig {
    std::size_t n = 10;
    double alpha = 2.0;
    // When set, alpha is replaced by the median pairwise training distance.
    bool alpha_auto = false;
    TiePolicy tie_policy = TiePolicy::HumanFirst;
    std::size_t median_sample_pairs = 20000;
    std::uint64_t median_seed = 0;
};

void validate(const ClConfig& config);

// Returns a copy with alpha fixed; resolves the auto mode against `split`.
ClConfig resolve_alpha(const ClConfig& config, const DatasetSplit& split);

struct NeighborTrace {
    std::int64_t id = 0;
    double distance = 0.0;
    double weight = 0.0;
    Label predicted = Label::AtMost50K;
    Label truth = Label::AtMost50K;

    bool operator==(const NeighborTrace&) const = default;
};

double neighbor_weight(double alpha, double distance);

// Mean over the trace of w*1(pred == truth) + (1 - w)*0.5.
double correctness_likelihood(std::span<const NeighborTrace> trace);

struct HumanClEstimate {
    double human_cl = 0.5;
    std::vector<NeighborTrace> neighbor_trace;
};

using HumanPredictor = std::function<Label(const TaskInstance&)>;

HumanClEstimate estimate_human_cl(const HumanPredictor& predictor, std::span<const Neighbor> neighbors,
                                  double alpha);
HumanClEstimate estimate_human_cl(const HumanModel& model, const TaskInstance& query,
                                  const DatasetSplit& split, const ClConfig& config);

struct ClEstimate {
    double human_cl = 0.5;
    double ai_cl = 0.5;
    Higher higher = Higher::Tie;
    std::vector<NeighborTrace> neighbor_trace;

    bool operator==(const ClEstimate&) const = default;
};

Higher compare_cl(double human_cl, double ai_cl);
Side compare(double human_cl, double ai_cl, TiePolicy tie_policy = TiePolicy::HumanFirst);
Side routed_side(Higher higher, TiePolicy tie_policy = TiePolicy::HumanFirst);

ClEstimate make_estimate(HumanClEstimate human, double ai_cl);

// Inclusive: confidence >= threshold routes to the AI.
Side confidence_router(double ai_confidence, double threshold);

enum class Outcome { HumanOnlyCorrect, AiOnlyCorrect, Both, Neither };

std::string_view to_string(Outcome o);
Outcome outcome_of(bool human_correct, bool ai_correct);

struct ComplementaryLabel {
    std::int64_t case_id = 0;
    Side predicted_better = Side::Human;
    Outcome actual = Outcome::Neither;
};

// nullopt when no case lies in the complementary region.
std::optional<double> complementary_recall(std::span<const ComplementaryLabel> labels);

nlohmann::json to_json(const NeighborTrace& t);
nlohmann::json to_json(const ClEstimate& e);
ClEstimate cl_estimate_from_json(const nlohmann::json& j);

}  // namespace cltrust
