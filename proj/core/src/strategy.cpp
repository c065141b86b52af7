#include "cltrust/strategy.hpp"

#include <algorithm>
#include <cmath>

#include "cltrust/error.hpp"

namespace cltrust {

std::string_view to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::HumanOnly: return "HumanOnly";
        case StrategyKind::AiConfidence: return "AiConfidence";
        case StrategyKind::DirectDisplay: return "DirectDisplay";
        case StrategyKind::AdaptiveWorkflow: return "AdaptiveWorkflow";
        case StrategyKind::AdaptiveRecommendation: return "AdaptiveRecommendation";
    }
    return "HumanOnly";
}

StrategyKind strategy_from_string(std::string_view text) {
    for (auto k : kAllStrategies) {
        if (to_string(k) == text) return k;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown condition: " + std::string(text));
}

bool needs_cl_estimate(StrategyKind kind) {
    return kind == StrategyKind::DirectDisplay || kind == StrategyKind::AdaptiveWorkflow ||
           kind == StrategyKind::AdaptiveRecommendation;
}

Presentation unassisted() { return Presentation{}; }

std::string summary_sentence(Side winner) {
    const char* first = winner == Side::Ai ? "the AI" : "you";
    const char* second = winner == Side::Ai ? "you" : "the AI";
    return std::string("According to the system's estimation, in this task case, ") + first +
           " might have a higher probability of making a correct decision than " + second + ".";
}

Presentation plan_step(StrategyKind kind, const std::optional<ClEstimate>& cl, const AiPrediction& ai,
                       TiePolicy tie_policy) {
    (void)ai;
    if (needs_cl_estimate(kind) && !cl) {
        throw Error(ErrorCode::InvalidArgument, std::string(to_string(kind)) + " needs a CL estimate");
    }
    Presentation p;
    p.kind = kind;
    switch (kind) {
        case StrategyKind::HumanOnly:
            break;
        case StrategyKind::AiConfidence:
            p.show_ai_recommendation = true;
            p.show_ai_confidence = true;
            break;
        case StrategyKind::DirectDisplay:
            p.show_ai_recommendation = true;
            p.show_human_cl = true;
            p.show_ai_cl = true;
            p.summary_text = summary_sentence(routed_side(cl->higher, tie_policy));
            break;
        case StrategyKind::AdaptiveWorkflow:
            p.show_ai_recommendation = true;
            p.require_pre_decision = routed_side(cl->higher, tie_policy) == Side::Human;
            break;
        case StrategyKind::AdaptiveRecommendation:
            p.show_explanation = true;
            p.show_ai_recommendation = routed_side(cl->higher, tie_policy) == Side::Ai;
            break;
    }
    return p;
}

std::vector<std::string> presentation_violations(const Presentation& p, std::optional<Higher> higher,
                                                 TiePolicy tie_policy) {
    std::vector<std::string> out;
    auto expect = [&](bool ok, const char* what) {
        if (!ok) out.push_back(std::string(to_string(p.kind)) + ": " + what);
    };
    const bool any_ai = p.show_ai_recommendation || p.show_ai_confidence || p.show_human_cl || p.show_ai_cl ||
                        p.show_explanation || p.require_pre_decision || !p.summary_text.empty();
    switch (p.kind) {
        case StrategyKind::HumanOnly:
            expect(!any_ai, "AI-related flag set");
            break;
        case StrategyKind::AiConfidence:
            expect(p.show_ai_recommendation, "recommendation hidden");
            expect(p.show_ai_confidence, "confidence hidden");
            expect(!p.show_human_cl, "human CL shown");
            break;
        case StrategyKind::DirectDisplay:
            expect(p.show_human_cl && p.show_ai_cl, "CL gauges hidden");
            expect(p.show_ai_recommendation, "recommendation hidden");
            expect(!p.summary_text.empty(), "summary sentence missing");
            break;
        case StrategyKind::AdaptiveWorkflow:
            if (!higher) {
                out.push_back("AdaptiveWorkflow: no CL comparison recorded");
                break;
            }
            expect(p.require_pre_decision == (routed_side(*higher, tie_policy) == Side::Human),
                   "pre-decision requirement disagrees with the CL comparison");
            break;
        case StrategyKind::AdaptiveRecommendation:
            if (!higher) {
                out.push_back("AdaptiveRecommendation: no CL comparison recorded");
                break;
            }
            expect(p.show_explanation, "explanation hidden");
            expect(p.show_ai_recommendation == (routed_side(*higher, tie_policy) == Side::Ai),
                   "recommendation visibility disagrees with the CL comparison");
            break;
    }
    return out;
}

namespace {

nlohmann::json case_json(const TaskInstance& t, const FeatureSchema& schema) {
    nlohmann::json features = nlohmann::json::object();
    for (std::size_t f = 0; f < schema.size(); ++f) {
        const auto& feat = schema.feature(f);
        if (feat.kind == FeatureKind::Numeric) {
            features[feat.name] = t.values[f];
        } else {
            features[feat.name] = feat.categories.at(static_cast<std::size_t>(t.values[f]));
        }
    }
    return {{"id", t.id}, {"features", features}};
}

}  // namespace

nlohmann::json render_payload(const Presentation& p, const StepContent& content, const FeatureSchema& schema) {
    if (!content.instance) throw Error(ErrorCode::InvalidArgument, "payload needs a case");
    nlohmann::json j{{"presentation", to_json(p)}, {"case", case_json(*content.instance, schema)}};
    if (p.require_pre_decision) return j;

    nlohmann::json ai = nlohmann::json::object();
    if (content.ai) {
        if (p.show_ai_recommendation) ai["label"] = std::string(to_string(content.ai->label));
        if (p.show_ai_confidence) ai["confidence"] = content.ai->confidence;
    }
    if (!ai.empty()) j["ai"] = ai;

    if (content.cl && (p.show_human_cl || p.show_ai_cl)) {
        nlohmann::json cl = nlohmann::json::object();
        if (p.show_human_cl) cl["human_cl"] = content.cl->human_cl;
        if (p.show_ai_cl) cl["ai_cl"] = content.cl->ai_cl;
        j["cl"] = cl;
    }

    if (p.show_explanation && content.explanation) {
        nlohmann::json contributions = nlohmann::json::array();
        for (const auto& c : content.explanation->contributions) {
            if (p.show_ai_recommendation) {
                contributions.push_back({{"feature", c.feature}, {"log_odds", c.log_odds}});
            } else {
                contributions.push_back({{"feature", c.feature},
                                         {"magnitude", std::abs(c.log_odds)},
                                         {"direction", c.log_odds >= 0.0 ? "higher_income" : "lower_income"}});
            }
        }
        nlohmann::json e{{"contributions", contributions}};
        if (p.show_ai_recommendation) e["base"] = content.explanation->base;
        j["explanation"] = e;
    }
    return j;
}

nlohmann::json render_reveal(const Presentation& p, const StepContent& content) {
    if (!p.require_pre_decision) throw Error(ErrorCode::InvalidArgument, "nothing to reveal");
    Presentation after = p;
    after.require_pre_decision = false;
    nlohmann::json j = nlohmann::json::object();
    if (content.ai && after.show_ai_recommendation) j["label"] = std::string(to_string(content.ai->label));
    if (content.ai && after.show_ai_confidence) j["confidence"] = content.ai->confidence;
    return {{"ai", j}};
}

nlohmann::json to_json(const Presentation& p) {
    return {{"condition", std::string(to_string(p.kind))},
            {"show_ai_recommendation", p.show_ai_recommendation},
            {"show_ai_confidence", p.show_ai_confidence},
            {"show_human_cl", p.show_human_cl},
            {"show_ai_cl", p.show_ai_cl},
            {"show_explanation", p.show_explanation},
            {"require_pre_decision", p.require_pre_decision},
            {"summary_text", p.summary_text}};
}

Presentation presentation_from_json(const nlohmann::json& j) {
    try {
        Presentation p;
        p.kind = strategy_from_string(j.at("condition").get<std::string>());
        p.show_ai_recommendation = j.at("show_ai_recommendation").get<bool>();
        p.show_ai_confidence = j.at("show_ai_confidence").get<bool>();
        p.show_human_cl = j.at("show_human_cl").get<bool>();
        p.show_ai_cl = j.at("show_ai_cl").get<bool>();
        p.show_explanation = j.at("show_explanation").get<bool>();
        p.require_pre_decision = j.at("require_pre_decision").get<bool>();
        p.summary_text = j.at("summary_text").get<std::string>();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("malformed presentation: ") + e.what());
    }
}

std::string_view to_string(TranscriptEventKind k) {
    switch (k) {
        case TranscriptEventKind::PreDecision: return "pre_decision";
        case TranscriptEventKind::FinalDecision: return "final_decision";
        case TranscriptEventKind::AiReveal: return "ai_reveal";
        case TranscriptEventKind::ConfidenceShown: return "confidence_shown";
        case TranscriptEventKind::HumanClShown: return "human_cl_shown";
        case TranscriptEventKind::AiClShown: return "ai_cl_shown";
        case TranscriptEventKind::ExplanationShown: return "explanation_shown";
    }
    return "?";
}

std::vector<std::string> validate_transcript(StrategyKind kind, const std::vector<TranscriptStep>& steps,
                                             TiePolicy tie_policy) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& step = steps[i];
        const auto& p = step.presentation;
        const std::string where = "step " + std::to_string(i + 1) + " (case " + std::to_string(step.case_id) + "): ";
        if (p.kind != kind) {
            out.push_back(where + "presentation for " + std::string(to_string(p.kind)) + " in a " +
                          std::string(to_string(kind)) + " session");
            continue;
        }
        for (const auto& v : presentation_violations(p, step.higher, tie_policy)) out.push_back(where + v);

        std::optional<std::int64_t> pre_at;
        std::size_t finals = 0;
        for (const auto& e : step.events) {
            if (e.kind == TranscriptEventKind::PreDecision) {
                if (pre_at) out.push_back(where + "more than one pre-decision");
                pre_at = e.timestamp;
            }
            if (e.kind == TranscriptEventKind::FinalDecision) ++finals;
        }
        if (finals != 1) out.push_back(where + "expected exactly one final decision");
        if (pre_at && !p.require_pre_decision) out.push_back(where + "pre-decision recorded where none was asked");
        if (p.require_pre_decision && !pre_at) out.push_back(where + "required pre-decision missing");

        for (const auto& e : step.events) {
            bool hidden = false;
            switch (e.kind) {
                case TranscriptEventKind::AiReveal: hidden = !p.show_ai_recommendation; break;
                case TranscriptEventKind::ConfidenceShown: hidden = !p.show_ai_confidence; break;
                case TranscriptEventKind::HumanClShown: hidden = !p.show_human_cl; break;
                case TranscriptEventKind::AiClShown: hidden = !p.show_ai_cl; break;
                case TranscriptEventKind::ExplanationShown: hidden = !p.show_explanation; break;
                default: break;
            }
            if (hidden) out.push_back(where + std::string(to_string(e.kind)) + " for a hidden field");
            const bool reveals_ai =
                e.kind == TranscriptEventKind::AiReveal || e.kind == TranscriptEventKind::ConfidenceShown;
            if (reveals_ai && p.require_pre_decision && (!pre_at || e.timestamp < *pre_at)) {
                out.push_back(where + "AI output revealed before the pre-decision");
            }
            if (e.kind == TranscriptEventKind::FinalDecision && pre_at && e.timestamp < *pre_at) {
                out.push_back(where + "final decision precedes the pre-decision");
            }
        }
    }
    return out;
}

}  // namespace cltrust
