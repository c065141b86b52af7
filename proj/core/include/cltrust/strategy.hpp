#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cltrust/ai_model.hpp"
#include "cltrust/cl_engine.hpp"

namespace cltrust {

enum class StrategyKind { HumanOnly, AiConfidence, DirectDisplay, AdaptiveWorkflow, AdaptiveRecommendation };

inline constexpr std::array<StrategyKind, 5> kAllStrategies{
    StrategyKind::HumanOnly, StrategyKind::AiConfidence, StrategyKind::DirectDisplay,
    StrategyKind::AdaptiveWorkflow, StrategyKind::AdaptiveRecommendation};

std::string_view to_string(StrategyKind kind);
StrategyKind strategy_from_string(std::string_view text);
bool needs_cl_estimate(StrategyKind kind);

struct Presentation {
    StrategyKind kind = StrategyKind::HumanOnly;
    bool show_ai_recommendation = false;
    bool show_ai_confidence = false;
    bool show_human_cl = false;
    bool show_ai_cl = false;
    bool show_explanation = false;
    bool require_pre_decision = false;
    std::string summary_text;

    bool operator==(const Presentation&) const = default;
};

// Presentation used for unassisted steps (batch 1).
Presentation unassisted();

std::string summary_sentence(Side winner);

Presentation plan_step(StrategyKind kind, const std::optional<ClEstimate>& cl, const AiPrediction& ai,
                       TiePolicy tie_policy = TiePolicy::HumanFirst);

// Violations of the flag table for one presentation; `higher` is required for
// the adaptive kinds.
std::vector<std::string> presentation_violations(const Presentation& p, std::optional<Higher> higher,
                                                 TiePolicy tie_policy = TiePolicy::HumanFirst);

struct StepContent {
    const TaskInstance* instance = nullptr;
    std::optional<AiPrediction> ai;
    std::optional<ClEstimate> cl;
    std::optional<Explanation> explanation;
};

// Client-facing JSON. Hidden data never appears: no AI label unless the
// recommendation is shown, no CL values or neighbor traces unless their
// gauges are shown, and an explanation without a visible recommendation is
// reduced to per-feature magnitude and direction.
nlohmann::json render_payload(const Presentation& p, const StepContent& content, const FeatureSchema& schema);

// Fields of the AI output revealed after a required pre-decision.
nlohmann::json render_reveal(const Presentation& p, const StepContent& content);

nlohmann::json to_json(const Presentation& p);
Presentation presentation_from_json(const nlohmann::json& j);

enum class TranscriptEventKind {
    PreDecision,
    FinalDecision,
    AiReveal,
    ConfidenceShown,
    HumanClShown,
    AiClShown,
    ExplanationShown,
};

std::string_view to_string(TranscriptEventKind k);

struct TranscriptEvent {
    TranscriptEventKind kind = TranscriptEventKind::FinalDecision;
    std::int64_t timestamp = 0;
};

struct TranscriptStep {
    std::int64_t case_id = 0;
    Presentation presentation;
    std::optional<Higher> higher;
    std::vector<TranscriptEvent> events;
};

// Empty when every step honours its presentation and required pre-decisions
// precede any AI reveal.
std::vector<std::string> validate_transcript(StrategyKind kind, const std::vector<TranscriptStep>& steps,
                                             TiePolicy tie_policy = TiePolicy::HumanFirst);

}  // namespace cltrust
