#include "cltrust/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "cltrust/error.hpp"

namespace cltrust {

std::string_view to_string(Perceived p) {
    switch (p) {
        case Perceived::Human: return "human";
        case Perceived::Ai: return "ai";
        case Perceived::Both: return "both";
    }
    return "both";
}

Perceived perceived_from_string(std::string_view text) {
    if (text == "human") return Perceived::Human;
    if (text == "ai") return Perceived::Ai;
    if (text == "both") return Perceived::Both;
    throw Error(ErrorCode::InvalidArgument, "unknown perceived side: " + std::string(text));
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

void require_assisted(std::span<const TrialLog> logs) {
    for (const auto& l : logs) {
        if (!l.ai_assisted()) {
            throw Error(ErrorCode::InvalidArgument, "case " + std::to_string(l.case_id) + " has no AI output");
        }
    }
}

}  // namespace

double agreement(std::span<const TrialLog> logs) {
    if (logs.empty()) throw Error(ErrorCode::InvalidArgument, "no trials");
    require_assisted(logs);
    std::size_t agreed = 0;
    for (const auto& l : logs) agreed += l.final_decision == *l.ai_label;
    return static_cast<double>(agreed) / static_cast<double>(logs.size());
}

double team_performance(std::span<const TrialLog> logs) {
    if (logs.empty()) throw Error(ErrorCode::InvalidArgument, "no trials");
    std::size_t correct = 0;
    for (const auto& l : logs) correct += l.final_decision == l.truth;
    return static_cast<double>(correct) / static_cast<double>(logs.size());
}

TrustAppropriateness trust_appropriateness(std::span<const TrialLog> logs) {
    require_assisted(logs);
    TrustAppropriateness t;
    std::size_t agree_correct = 0, agree_wrong = 0;
    for (const auto& l : logs) {
        bool agreed = l.final_decision == *l.ai_label;
        if (*l.ai_correct) {
            ++t.n_ai_correct;
            agree_correct += agreed;
        } else {
            ++t.n_ai_wrong;
            agree_wrong += agreed;
        }
    }
    t.agreement_ai_correct = ratio(agree_correct, t.n_ai_correct);
    t.agreement_ai_wrong = ratio(agree_wrong, t.n_ai_wrong);
    return t;
}

std::string_view to_string(RegionCell c) {
    switch (c) {
        case RegionCell::LowCorrect: return "Low&Correct";
        case RegionCell::HighWrong: return "High&Wrong";
        case RegionCell::LowWrong: return "Low&Wrong";
        case RegionCell::HighCorrect: return "High&Correct";
    }
    return "?";
}

RegionCell region_of(double confidence, bool ai_correct, double threshold) {
    const bool high = confidence >= threshold;
    if (high) return ai_correct ? RegionCell::HighCorrect : RegionCell::HighWrong;
    return ai_correct ? RegionCell::LowCorrect : RegionCell::LowWrong;
}

std::size_t RegionTable::total() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += c.count;
    return n;
}

namespace {

void finish(RegionStats& s) {
    s.team_performance = ratio(s.correct, s.count);
    s.agreement = ratio(s.agreed, s.count);
}

RegionStats merge(const RegionStats& a, const RegionStats& b) {
    RegionStats s{a.count + b.count, a.correct + b.correct, a.agreed + b.agreed, {}, {}};
    finish(s);
    return s;
}

}  // namespace

RegionTable region_breakdown(std::span<const TrialLog> logs, double threshold) {
    require_assisted(logs);
    RegionTable t;
    for (const auto& l : logs) {
        auto& cell = t.cells[static_cast<std::size_t>(region_of(*l.ai_confidence, *l.ai_correct, threshold))];
        ++cell.count;
        cell.correct += l.final_decision == l.truth;
        cell.agreed += l.final_decision == *l.ai_label;
    }
    for (auto& c : t.cells) finish(c);
    t.conflict = merge(t[RegionCell::LowCorrect], t[RegionCell::HighWrong]);
    t.consistent = merge(t[RegionCell::LowWrong], t[RegionCell::HighCorrect]);
    return t;
}

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw Error(ErrorCode::InvalidArgument, "pearson inputs differ in length");
    if (xs.size() < 3) throw Error(ErrorCode::InvalidArgument, "pearson needs at least 3 points");
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

PerceivedConsistency perceived_cl_consistency(std::span<const TrialLog> logs) {
    PerceivedConsistency out;
    std::size_t matched = 0;
    for (const auto& l : logs) {
        if (!l.perceived_higher || !l.cl_estimate) {
            ++out.excluded;
            continue;
        }
        ++out.evaluated;
        Perceived expected = l.cl_estimate->higher == Higher::Human ? Perceived::Human
                             : l.cl_estimate->higher == Higher::Ai  ? Perceived::Ai
                                                                    : Perceived::Both;
        matched += *l.perceived_higher == expected;
    }
    out.fraction = ratio(matched, out.evaluated);
    return out;
}

MetricsReport build_report(std::span<const TrialLog> logs, double threshold, TiePolicy tie_policy) {
    if (logs.empty()) throw Error(ErrorCode::InvalidArgument, "no trials");
    MetricsReport r;
    r.condition = logs.front().condition;
    for (const auto& l : logs) {
        if (l.condition != r.condition) throw Error(ErrorCode::InvalidArgument, "report mixes conditions");
    }
    r.trials = logs.size();
    r.team_performance = team_performance(logs);
    const bool assisted = std::all_of(logs.begin(), logs.end(), [](const TrialLog& l) { return l.ai_assisted(); });
    if (assisted) {
        r.agreement = agreement(logs);
        r.trust = trust_appropriateness(logs);
        r.regions = region_breakdown(logs, threshold);
    }

    std::size_t nh = 0, ch = 0, na = 0, ca = 0;
    std::vector<ComplementaryLabel> labels;
    std::map<std::string, std::pair<double, double>> per_participant;  // sum CL, correct
    std::map<std::string, std::size_t> per_participant_n;
    for (const auto& l : logs) {
        ++per_participant_n[l.participant];
        if (!l.cl_estimate) continue;
        const bool correct = l.final_decision == l.truth;
        if (routed_side(l.cl_estimate->higher, tie_policy) == Side::Human) {
            ++nh;
            ch += correct;
        } else {
            ++na;
            ca += correct;
        }
        auto& acc = per_participant[l.participant];
        acc.first += l.cl_estimate->human_cl;
        acc.second += correct ? 1.0 : 0.0;
        if (l.human_pre_decision && l.ai_correct) {
            labels.push_back({l.case_id, routed_side(l.cl_estimate->higher, tie_policy),
                              outcome_of(*l.human_pre_decision == l.truth, *l.ai_correct)});
        }
    }
    r.participants = per_participant_n.size();
    r.performance_human_higher = ratio(ch, nh);
    r.performance_ai_higher = ratio(ca, na);
    r.complementary_recall = complementary_recall(labels);
    if (per_participant.size() >= 3) {
        std::vector<double> xs, ys;
        for (const auto& [p, acc] : per_participant) {
            double n = 0;
            for (const auto& l : logs) n += (l.participant == p && l.cl_estimate) ? 1.0 : 0.0;
            xs.push_back(acc.first / n);
            ys.push_back(acc.second / n);
        }
        r.pearson_r = pearson(xs, ys);
    }
    r.perceived = perceived_cl_consistency(logs);
    return r;
}

std::vector<MetricsReport> build_reports(std::span<const TrialLog> logs, double threshold, TiePolicy tie_policy) {
    std::vector<MetricsReport> out;
    for (auto kind : kAllStrategies) {
        std::vector<TrialLog> group;
        for (const auto& l : logs) {
            if (l.condition == kind) group.push_back(l);
        }
        if (!group.empty()) out.push_back(build_report(group, threshold, tie_policy));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json stats_json(const RegionStats& s) {
    return {{"count", s.count}, {"team_performance", opt(s.team_performance)}, {"agreement", opt(s.agreement)}};
}

}  // namespace

nlohmann::json to_json(const TrialLog& l) {
    nlohmann::json j{{"participant", l.participant},
                     {"case_id", l.case_id},
                     {"condition", std::string(to_string(l.condition))},
                     {"final_decision", std::string(to_string(l.final_decision))},
                     {"truth", std::string(to_string(l.truth))}};
    if (l.ai_label) j["ai_label"] = std::string(to_string(*l.ai_label));
    if (l.ai_confidence) j["ai_confidence"] = *l.ai_confidence;
    if (l.ai_correct) j["ai_correct"] = *l.ai_correct;
    if (l.human_pre_decision) j["human_pre_decision"] = std::string(to_string(*l.human_pre_decision));
    if (l.cl_estimate) j["cl_estimate"] = to_json(*l.cl_estimate);
    if (l.perceived_higher) j["perceived_higher"] = std::string(to_string(*l.perceived_higher));
    nlohmann::json timing = nlohmann::json::array();
    for (const auto& [k, v] : l.timing) timing.push_back({{"event", k}, {"at", v}});
    j["timing"] = timing;
    return j;
}

TrialLog trial_log_from_json(const nlohmann::json& j) {
    try {
        TrialLog l;
        l.participant = j.value("participant", "");
        l.case_id = j.at("case_id").get<std::int64_t>();
        l.condition = strategy_from_string(j.at("condition").get<std::string>());
        l.final_decision = label_from_string(j.at("final_decision").get<std::string>());
        l.truth = label_from_string(j.at("truth").get<std::string>());
        if (j.contains("ai_label")) l.ai_label = label_from_string(j.at("ai_label").get<std::string>());
        if (j.contains("ai_confidence")) l.ai_confidence = j.at("ai_confidence").get<double>();
        if (j.contains("ai_correct")) l.ai_correct = j.at("ai_correct").get<bool>();
        if (j.contains("human_pre_decision")) {
            l.human_pre_decision = label_from_string(j.at("human_pre_decision").get<std::string>());
        }
        if (j.contains("cl_estimate")) l.cl_estimate = cl_estimate_from_json(j.at("cl_estimate"));
        if (j.contains("perceived_higher")) {
            l.perceived_higher = perceived_from_string(j.at("perceived_higher").get<std::string>());
        }
        if (j.contains("timing")) {
            for (const auto& t : j.at("timing")) {
                l.timing.emplace_back(t.at("event").get<std::string>(), t.at("at").get<std::int64_t>());
            }
        }
        const bool has_ai = l.ai_label && l.ai_confidence && l.ai_correct;
        const bool no_ai = !l.ai_label && !l.ai_confidence && !l.ai_correct;
        if (!(has_ai || no_ai) || has_ai == (l.condition == StrategyKind::HumanOnly)) {
            throw Error(ErrorCode::Parse, "trial " + std::to_string(l.case_id) +
                                              ": AI fields must be present exactly when AI-assisted");
        }
        return l;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("malformed trial log: ") + e.what());
    }
}

nlohmann::json to_json(const RegionTable& t) {
    nlohmann::json cells = nlohmann::json::object();
    for (auto c : kAllRegionCells) cells[std::string(to_string(c))] = stats_json(t[c]);
    return {{"cells", cells}, {"conflict", stats_json(t.conflict)}, {"consistent", stats_json(t.consistent)}};
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json j{{"condition", std::string(to_string(r.condition))},
                     {"trials", r.trials},
                     {"participants", r.participants},
                     {"team_performance", r.team_performance},
                     {"agreement", opt(r.agreement)},
                     {"performance_human_higher", opt(r.performance_human_higher)},
                     {"performance_ai_higher", opt(r.performance_ai_higher)},
                     {"complementary_recall", opt(r.complementary_recall)},
                     {"pearson_r", opt(r.pearson_r)},
                     {"perceived_cl_consistency",
                      {{"fraction", opt(r.perceived.fraction)},
                       {"evaluated", r.perceived.evaluated},
                       {"excluded", r.perceived.excluded}}}};
    if (r.trust) {
        j["trust_appropriateness"] = {{"agreement_ai_correct", opt(r.trust->agreement_ai_correct)},
                                      {"agreement_ai_wrong", opt(r.trust->agreement_ai_wrong)},
                                      {"n_ai_correct", r.trust->n_ai_correct},
                                      {"n_ai_wrong", r.trust->n_ai_wrong}};
    } else {
        j["trust_appropriateness"] = nullptr;
    }
    j["regions"] = r.regions ? to_json(*r.regions) : nlohmann::json(nullptr);
    return j;
}

namespace {

std::string cell(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return buf;
}

}  // namespace

std::string render_table(const std::vector<MetricsReport>& reports) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-24s %6s %8s %8s %8s %8s %8s %8s\n", "condition", "n", "perf", "agree",
                  "agr|ok", "agr|bad", "conflict", "consist");
    out << line;
    for (const auto& r : reports) {
        std::optional<double> ac, aw, conf, cons;
        if (r.trust) {
            ac = r.trust->agreement_ai_correct;
            aw = r.trust->agreement_ai_wrong;
        }
        if (r.regions) {
            conf = r.regions->conflict.team_performance;
            cons = r.regions->consistent.team_performance;
        }
        std::snprintf(line, sizeof line, "%-24s %6zu %8s %8s %8s %8s %8s %8s\n",
                      std::string(to_string(r.condition)).c_str(), r.trials, cell(r.team_performance).c_str(),
                      cell(r.agreement).c_str(), cell(ac).c_str(), cell(aw).c_str(), cell(conf).c_str(),
                      cell(cons).c_str());
        out << line;
    }
    bool header = false;
    for (const auto& r : reports) {
        if (!r.regions) continue;
        if (!header) {
            std::snprintf(line, sizeof line, "\n%-24s %14s %14s %14s %14s\n", "region performance", "Low&Correct",
                          "High&Wrong", "Low&Wrong", "High&Correct");
            out << line;
            header = true;
        }
        std::string row;
        for (auto c : kAllRegionCells) {
            const auto& s = (*r.regions)[c];
            char buf[40];
            std::snprintf(buf, sizeof buf, " %8s (%3zu)", cell(s.team_performance).c_str(), s.count);
            row += buf;
        }
        std::snprintf(line, sizeof line, "%-24s%s\n", std::string(to_string(r.condition)).c_str(), row.c_str());
        out << line;
    }
    return out.str();
}

}  // namespace cltrust
