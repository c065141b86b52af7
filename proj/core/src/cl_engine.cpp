#include "cltrust/cl_engine.hpp"

#include <cmath>

#include "cltrust/error.hpp"

namespace cltrust {

std::string_view to_string(Side s) { return s == Side::Human ? "human" : "ai"; }

std::string_view to_string(Higher h) {
    switch (h) {
        case Higher::Human: return "human";
        case Higher::Ai: return "ai";
        case Higher::Tie: return "tie";
    }
    return "tie";
}

std::string_view to_string(TiePolicy p) { return p == TiePolicy::HumanFirst ? "human-first" : "ai-first"; }

Side side_from_string(std::string_view text) {
    if (text == "human") return Side::Human;
    if (text == "ai") return Side::Ai;
    throw Error(ErrorCode::InvalidArgument, "unknown side: " + std::string(text));
}

Higher higher_from_string(std::string_view text) {
    if (text == "human") return Higher::Human;
    if (text == "ai") return Higher::Ai;
    if (text == "tie") return Higher::Tie;
    throw Error(ErrorCode::InvalidArgument, "unknown comparison: " + std::string(text));
}

TiePolicy tie_policy_from_string(std::string_view text) {
    if (text == "human-first") return TiePolicy::HumanFirst;
    if (text == "ai-first") return TiePolicy::AiFirst;
    throw Error(ErrorCode::InvalidArgument, "unknown tie policy: " + std::string(text));
}

void validate(const ClConfig& config) {
    if (config.n < 1) throw Error(ErrorCode::InvalidArgument, "neighbor count must be at least 1");
    if (!config.alpha_auto && !(config.alpha > 0.0 && std::isfinite(config.alpha))) {
        throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
    }
}

ClConfig resolve_alpha(const ClConfig& config, const DatasetSplit& split) {
    validate(config);
    ClConfig out = config;
    if (config.alpha_auto) {
        out.alpha = median_pairwise_distance(split, config.median_sample_pairs, config.median_seed);
        out.alpha_auto = false;
        if (!(out.alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "median pairwise distance is zero");
    }
    return out;
}

double neighbor_weight(double alpha, double distance) { return alpha / (alpha + distance); }

double correctness_likelihood(std::span<const NeighborTrace> trace) {
    if (trace.empty()) throw Error(ErrorCode::InvalidArgument, "no neighbors");
    double sum = 0.0;
    for (const auto& t : trace) {
        double hit = t.predicted == t.truth ? 1.0 : 0.0;
        sum += t.weight * hit + (1.0 - t.weight) * 0.5;
    }
    return sum / static_cast<double>(trace.size());
}

HumanClEstimate estimate_human_cl(const HumanPredictor& predictor, std::span<const Neighbor> neighbors,
                                  double alpha) {
    if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
    HumanClEstimate out;
    out.neighbor_trace.reserve(neighbors.size());
    for (const auto& nb : neighbors) {
        out.neighbor_trace.push_back({nb.instance->id, nb.distance, neighbor_weight(alpha, nb.distance),
                                      predictor(*nb.instance), nb.instance->label});
    }
    out.human_cl = correctness_likelihood(out.neighbor_trace);
    return out;
}

HumanClEstimate estimate_human_cl(const HumanModel& model, const TaskInstance& query,
                                  const DatasetSplit& split, const ClConfig& config) {
    validate(config);
    if (config.alpha_auto) throw Error(ErrorCode::InvalidArgument, "alpha must be resolved before estimation");
    if (split.train().size() < config.n) {
        throw Error(ErrorCode::InvalidArgument, "fewer training instances than the neighbor count");
    }
    auto neighbors = nearest_neighbors(query, split, config.n, query.id);
    return estimate_human_cl([&](const TaskInstance& t) { return predict_human(model, t).label; }, neighbors,
                             config.alpha);
}

Higher compare_cl(double human_cl, double ai_cl) {
    if (human_cl > ai_cl) return Higher::Human;
    if (ai_cl > human_cl) return Higher::Ai;
    return Higher::Tie;
}

Side routed_side(Higher higher, TiePolicy tie_policy) {
    switch (higher) {
        case Higher::Human: return Side::Human;
        case Higher::Ai: return Side::Ai;
        case Higher::Tie: break;
    }
    return tie_policy == TiePolicy::HumanFirst ? Side::Human : Side::Ai;
}

Side compare(double human_cl, double ai_cl, TiePolicy tie_policy) {
    return routed_side(compare_cl(human_cl, ai_cl), tie_policy);
}

ClEstimate make_estimate(HumanClEstimate human, double ai_cl) {
    ClEstimate e;
    e.human_cl = human.human_cl;
    e.ai_cl = ai_cl;
    e.higher = compare_cl(e.human_cl, ai_cl);
    e.neighbor_trace = std::move(human.neighbor_trace);
    return e;
}

Side confidence_router(double ai_confidence, double threshold) {
    if (!(threshold > 0.5 && threshold < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "confidence threshold must lie in (0.5, 1)");
    }
    return ai_confidence >= threshold ? Side::Ai : Side::Human;
}

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::HumanOnlyCorrect: return "human-only-correct";
        case Outcome::AiOnlyCorrect: return "ai-only-correct";
        case Outcome::Both: return "both";
        case Outcome::Neither: return "neither";
    }
    return "neither";
}

Outcome outcome_of(bool human_correct, bool ai_correct) {
    if (human_correct && ai_correct) return Outcome::Both;
    if (human_correct) return Outcome::HumanOnlyCorrect;
    if (ai_correct) return Outcome::AiOnlyCorrect;
    return Outcome::Neither;
}

std::optional<double> complementary_recall(std::span<const ComplementaryLabel> labels) {
    std::size_t region = 0, hits = 0;
    for (const auto& l : labels) {
        if (l.actual == Outcome::HumanOnlyCorrect) {
            ++region;
            hits += l.predicted_better == Side::Human;
        } else if (l.actual == Outcome::AiOnlyCorrect) {
            ++region;
            hits += l.predicted_better == Side::Ai;
        }
    }
    if (region == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(region);
}

nlohmann::json to_json(const NeighborTrace& t) {
    return {{"id", t.id},
            {"distance", t.distance},
            {"weight", t.weight},
            {"predicted", std::string(to_string(t.predicted))},
            {"truth", std::string(to_string(t.truth))}};
}

nlohmann::json to_json(const ClEstimate& e) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& t : e.neighbor_trace) trace.push_back(to_json(t));
    return {{"human_cl", e.human_cl},
            {"ai_cl", e.ai_cl},
            {"higher", std::string(to_string(e.higher))},
            {"neighbor_trace", trace}};
}

ClEstimate cl_estimate_from_json(const nlohmann::json& j) {
    try {
        ClEstimate e;
        e.human_cl = j.at("human_cl").get<double>();
        e.ai_cl = j.at("ai_cl").get<double>();
        e.higher = higher_from_string(j.at("higher").get<std::string>());
        for (const auto& t : j.at("neighbor_trace")) {
            e.neighbor_trace.push_back({t.at("id").get<std::int64_t>(), t.at("distance").get<double>(),
                                        t.at("weight").get<double>(),
                                        label_from_string(t.at("predicted").get<std::string>()),
                                        label_from_string(t.at("truth").get<std::string>())});
        }
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::Parse, std::string("malformed estimate: ") + ex.what());
    }
}

}  // namespace cltrust
