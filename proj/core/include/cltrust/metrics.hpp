#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cltrust/cl_engine.hpp"
#include "cltrust/strategy.hpp"

namespace cltrust {

enum class Perceived { Human, Ai, Both };

std::string_view to_string(Perceived p);
Perceived perceived_from_string(std::string_view text);

struct TrialLog {
    std::string participant;
    std::int64_t case_id = 0;
    StrategyKind condition = StrategyKind::HumanOnly;
    // Absent exactly when the condition is HumanOnly.
    std::optional<Label> ai_label;
    std::optional<double> ai_confidence;
    std::optional<bool> ai_correct;
    std::optional<Label> human_pre_decision;
    Label final_decision = Label::AtMost50K;
    Label truth = Label::AtMost50K;
    std::optional<ClEstimate> cl_estimate;
    std::optional<Perceived> perceived_higher;
    std::vector<std::pair<std::string, std::int64_t>> timing;

    bool ai_assisted() const { return ai_label.has_value(); }
    bool operator==(const TrialLog&) const = default;
};

// Throws on an empty set or when a HumanOnly log is present.
double agreement(std::span<const TrialLog> logs);
// Throws on an empty set.
double team_performance(std::span<const TrialLog> logs);

struct TrustAppropriateness {
    std::optional<double> agreement_ai_correct;
    std::optional<double> agreement_ai_wrong;
    std::size_t n_ai_correct = 0;
    std::size_t n_ai_wrong = 0;
};

TrustAppropriateness trust_appropriateness(std::span<const TrialLog> logs);

enum class RegionCell { LowCorrect, HighWrong, LowWrong, HighCorrect };

inline constexpr std::array<RegionCell, 4> kAllRegionCells{RegionCell::LowCorrect, RegionCell::HighWrong,
                                                           RegionCell::LowWrong, RegionCell::HighCorrect};

std::string_view to_string(RegionCell c);
RegionCell region_of(double confidence, bool ai_correct, double threshold);

struct RegionStats {
    std::size_t count = 0;
    std::size_t correct = 0;
    std::size_t agreed = 0;
    std::optional<double> team_performance;
    std::optional<double> agreement;
};

struct RegionTable {
    std::array<RegionStats, 4> cells{};  // indexed by RegionCell
    RegionStats conflict;
    RegionStats consistent;

    const RegionStats& operator[](RegionCell c) const { return cells[static_cast<std::size_t>(c)]; }
    std::size_t total() const;
};

// Threshold inclusive: confidence >= threshold is High.
RegionTable region_breakdown(std::span<const TrialLog> logs, double threshold);

// Sample Pearson coefficient; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);

struct PerceivedConsistency {
    std::optional<double> fraction;
    std::size_t evaluated = 0;
    std::size_t excluded = 0;
};

PerceivedConsistency perceived_cl_consistency(std::span<const TrialLog> logs);

struct MetricsReport {
    StrategyKind condition = StrategyKind::HumanOnly;
    std::size_t trials = 0;
    std::size_t participants = 0;
    double team_performance = 0.0;
    std::optional<double> agreement;
    std::optional<TrustAppropriateness> trust;
    std::optional<RegionTable> regions;
    // Team performance on steps routed to each side by the CL comparison.
    std::optional<double> performance_human_higher;
    std::optional<double> performance_ai_higher;
    // Over steps with a CL estimate and an independent pre-decision.
    std::optional<double> complementary_recall;
    // Per-participant mean human CL against accuracy.
    std::optional<double> pearson_r;
    PerceivedConsistency perceived;
};

MetricsReport build_report(std::span<const TrialLog> logs, double threshold,
                           TiePolicy tie_policy = TiePolicy::HumanFirst);
// One report per condition present, in canonical condition order.
std::vector<MetricsReport> build_reports(std::span<const TrialLog> logs, double threshold,
                                         TiePolicy tie_policy = TiePolicy::HumanFirst);

nlohmann::json to_json(const TrialLog& log);
TrialLog trial_log_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RegionTable& t);
nlohmann::json to_json(const MetricsReport& r);
std::string render_table(const std::vector<MetricsReport>& reports);

}  // namespace cltrust
