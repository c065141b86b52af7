#include "cltrust/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <thread>

#include "cltrust/error.hpp"
#include "cltrust/hashing.hpp"

namespace cltrust {

Label SyntheticAgent::policy(const TaskInstance& instance) const {
    if (auto hit = true_ruleset.predict(instance)) return hit->label;
    return true_tree.predict(instance);
}

namespace {

bool coin(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

class PolicyGrower {
public:
    PolicyGrower(const AgentParams& params, const DatasetSplit& split, std::mt19937_64& rng)
        : params_(params), split_(split), rng_(rng) {}

    DecisionTreeModel grow() {
        const auto& train = split_.train();
        std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
        std::vector<const TaskInstance*> rows;
        rows.reserve(params_.label_sample);
        for (std::size_t i = 0; i < params_.label_sample; ++i) rows.push_back(&train[pick(rng_)]);
        node(rows, 0);
        return std::move(tree_);
    }

private:
    int leaf(const std::vector<const TaskInstance*>& rows, int index) {
        auto& n = tree_.nodes[static_cast<std::size_t>(index)];
        for (const auto* r : rows) ++n.counts[static_cast<std::size_t>(r->label)];
        Label majority;
        if (rows.empty()) {
            majority = coin(rng_, 0.5) ? Label::Over50K : Label::AtMost50K;
        } else {
            majority = 2 * n.counts[1] >= rows.size() ? Label::Over50K : Label::AtMost50K;
        }
        n.leaf_class = coin(rng_, params_.misconception_rate) ? flip(majority) : majority;
        return index;
    }

    int node(const std::vector<const TaskInstance*>& rows, std::size_t depth) {
        int index = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        if (depth >= params_.max_depth || rows.size() < params_.min_rows ||
            (depth > 0 && coin(rng_, params_.stop_probability))) {
            return leaf(rows, index);
        }
        const auto& schema = split_.schema();
        auto f = std::uniform_int_distribution<std::size_t>(0, schema.size() - 1)(rng_);
        TreeNode split_node;
        split_node.feature = static_cast<int>(f);
        if (schema.feature(f).kind == FeatureKind::Numeric) {
            std::vector<double> v;
            for (const auto* r : rows) v.push_back(r->values[f]);
            split_node.threshold = quantile(std::move(v), std::uniform_real_distribution<double>(0.2, 0.8)(rng_));
        } else {
            std::vector<int> present;
            for (const auto* r : rows) present.push_back(static_cast<int>(r->values[f]));
            std::sort(present.begin(), present.end());
            present.erase(std::unique(present.begin(), present.end()), present.end());
            split_node.categorical = true;
            split_node.category =
                present[std::uniform_int_distribution<std::size_t>(0, present.size() - 1)(rng_)];
        }
        std::vector<const TaskInstance*> left, right;
        for (const auto* r : rows) {
            double v = r->values[f];
            bool go_left = split_node.categorical ? static_cast<int>(v) == split_node.category
                                                  : v <= split_node.threshold;
            (go_left ? left : right).push_back(r);
        }
        if (left.empty() || right.empty()) return leaf(rows, index);
        int l = node(left, depth + 1);
        int r = node(right, depth + 1);
        split_node.left = l;
        split_node.right = r;
        auto& n = tree_.nodes[static_cast<std::size_t>(index)];
        split_node.leaf_class = n.leaf_class;
        for (const auto* row : rows) ++split_node.counts[static_cast<std::size_t>(row->label)];
        n = split_node;
        return index;
    }

    const AgentParams& params_;
    const DatasetSplit& split_;
    std::mt19937_64& rng_;
    DecisionTreeModel tree_;
};

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must lie in [0, 1]");
}

}  // namespace

SyntheticAgent make_agent(const AgentParams& params, const DatasetSplit& split, std::uint64_t seed) {
    check_probability(params.noise_rate, "noise rate");
    check_probability(params.revision_fidelity, "revision fidelity");
    check_probability(params.misconception_rate, "misconception rate");
    check_probability(params.stop_probability, "stop probability");
    if (split.train().empty()) throw Error(ErrorCode::InvalidArgument, "empty training split");
    std::mt19937_64 rng(mix_seed(seed, 0));
    auto tree = PolicyGrower(params, split, rng).grow();
    return make_agent(std::move(tree), split.schema(), params.noise_rate, params.revision_fidelity, seed);
}

SyntheticAgent make_agent(DecisionTreeModel tree, const FeatureSchema& schema, double noise_rate,
                          double revision_fidelity, std::uint64_t seed) {
    check_probability(noise_rate, "noise rate");
    check_probability(revision_fidelity, "revision fidelity");
    SyntheticAgent a;
    a.true_ruleset = tree_to_rules(tree, schema);
    a.true_tree = std::move(tree);
    a.noise_rate = noise_rate;
    a.revision_fidelity = revision_fidelity;
    a.seed = seed;
    return a;
}

std::vector<DecisionRecord> simulate_decisions(const SyntheticAgent& agent, std::span<const TaskInstance> cases,
                                               std::uint64_t stream) {
    std::mt19937_64 rng(mix_seed(agent.seed, 100 + stream));
    std::vector<DecisionRecord> out;
    out.reserve(cases.size());
    std::int64_t t = 0;
    for (const auto& c : cases) {
        Label d = agent.policy(c);
        if (coin(rng, agent.noise_rate)) d = flip(d);
        out.push_back({c, d, t++});
    }
    return out;
}

RuleSet simulate_editing(const SyntheticAgent& agent, const RuleSet& induced, const FeatureSchema& schema) {
    std::mt19937_64 rng(mix_seed(agent.seed, 1));
    std::vector<int> original_ids;
    for (const auto& r : induced.rules) original_ids.push_back(r.id);

    RuleSet current = induced;
    for (int id : original_ids) {
        if (!coin(rng, agent.revision_fidelity)) continue;
        const Rule* rule = current.find(id);
        Region region = region_of(rule->conditions, schema);
        std::vector<std::pair<std::vector<Condition>, Label>> pieces;
        for (const auto& t : agent.true_ruleset.rules) {
            Region both = region.intersect(region_of(t.conditions, schema));
            if (!both.empty()) pieces.emplace_back(both.to_conditions(schema), t.prediction);
        }
        if (pieces.empty()) continue;
        RuleEdit modify;
        modify.kind = RuleEdit::Kind::Modify;
        modify.rule_id = id;
        modify.conditions = pieces.front().first;
        modify.prediction = pieces.front().second;
        current = apply_edit(current, modify, schema);
        int position = current.find(id)->priority;
        for (std::size_t k = 1; k < pieces.size(); ++k) {
            RuleEdit add;
            add.kind = RuleEdit::Kind::Add;
            add.conditions = pieces[k].first;
            add.prediction = pieces[k].second;
            add.priority = position + static_cast<int>(k);
            current = apply_edit(current, add, schema);
        }
    }
    return current;
}

std::string_view to_string(CaseSource s) { return s == CaseSource::Selector ? "selector" : "random"; }

CaseSource case_source_from_string(std::string_view text) {
    if (text == "selector") return CaseSource::Selector;
    if (text == "random") return CaseSource::RandomSample;
    throw Error(ErrorCode::InvalidArgument, "unknown case source: " + std::string(text));
}

void validate(const ExperimentConfig& c) {
    if (c.agents < 1) throw Error(ErrorCode::InvalidArgument, "at least one agent required");
    if (c.replications < 1) throw Error(ErrorCode::InvalidArgument, "at least one replication required");
    auto range = [](double lo, double hi, const char* what) {
        check_probability(lo, what);
        check_probability(hi, what);
        if (lo > hi) throw Error(ErrorCode::InvalidArgument, std::string(what) + " range is inverted");
    };
    range(c.noise_min, c.noise_max, "noise rate");
    range(c.fidelity_min, c.fidelity_max, "revision fidelity");
    range(c.misconception_min, c.misconception_max, "misconception rate");
    check_probability(c.reliance.adopt_shown, "adoption probability");
    check_probability(c.reliance.switch_on_cue, "switch probability");
    validate(c.cl);
    if (!(c.confidence_threshold > 0.5 && c.confidence_threshold < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "confidence threshold must lie in (0.5, 1)");
    }
}

SimCases prepare_cases(const ExperimentConfig& config, const DatasetSplit& split, const LinearClassifier& model,
                       std::uint64_t seed) {
    SimCases out;
    if (config.case_source == CaseSource::Selector) {
        auto set = select_task_cases(model, split, config.selection, seed);
        if (set.batches.size() < 2) throw Error(ErrorCode::InvalidArgument, "simulation needs two batches");
        out.batch1 = set.batches[0];
        out.batch2 = set.batches[1];
    } else {
        const std::size_t per_batch = config.selection.low_per_batch + config.selection.high_per_batch;
        if (split.test().size() < 2 * per_batch) throw Error(ErrorCode::InvalidArgument, "test split too small");
        std::vector<std::size_t> idx(split.test().size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::mt19937_64 rng(mix_seed(seed, 17));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < 2 * per_batch; ++k) {
            const auto& inst = split.test()[idx[k]];
            auto ai = predict(model, inst, split);
            (k < per_batch ? out.batch1 : out.batch2).push_back({inst, ai, ai.label == inst.label});
        }
    }
    ClConfig cl = resolve_alpha(config.cl, split);
    for (const auto& c : out.batch2) out.neighbors2.push_back(nearest_neighbors(c.instance, split, cl.n, c.instance.id));
    return out;
}

namespace {

struct PolicyView {
    bool rec_visible = false;
    std::optional<Label> rec;
    bool require_pre = false;
    std::optional<double> human_cl, ai_cl;
};

PolicyView view_of(const nlohmann::json& payload) {
    PolicyView v;
    v.require_pre = payload.at("presentation").at("require_pre_decision").get<bool>();
    if (payload.contains("ai") && payload["ai"].contains("label")) {
        v.rec_visible = true;
        v.rec = label_from_string(payload["ai"]["label"].get<std::string>());
    }
    if (payload.contains("cl")) {
        const auto& cl = payload["cl"];
        if (cl.contains("human_cl")) v.human_cl = cl["human_cl"].get<double>();
        if (cl.contains("ai_cl")) v.ai_cl = cl["ai_cl"].get<double>();
    }
    return v;
}

std::vector<TranscriptEvent> shown_events(const nlohmann::json& payload, std::int64_t t) {
    std::vector<TranscriptEvent> ev;
    if (payload.contains("ai")) {
        if (payload["ai"].contains("label")) ev.push_back({TranscriptEventKind::AiReveal, t});
        if (payload["ai"].contains("confidence")) ev.push_back({TranscriptEventKind::ConfidenceShown, t});
    }
    if (payload.contains("cl")) {
        if (payload["cl"].contains("human_cl")) ev.push_back({TranscriptEventKind::HumanClShown, t});
        if (payload["cl"].contains("ai_cl")) ev.push_back({TranscriptEventKind::AiClShown, t});
    }
    if (payload.contains("explanation")) ev.push_back({TranscriptEventKind::ExplanationShown, t});
    return ev;
}

}  // namespace

AgentOutcome run_agent(const SyntheticAgent& agent, const SimCases& cases, const DatasetSplit& split,
                       const ExperimentConfig& config, const std::string& name) {
    const auto& schema = split.schema();
    ClConfig cl_config = resolve_alpha(config.cl, split);
    AgentOutcome out;

    std::vector<TaskInstance> b1, b2;
    for (const auto& c : cases.batch1) b1.push_back(c.instance);
    for (const auto& c : cases.batch2) b2.push_back(c.instance);

    auto records = simulate_decisions(agent, b1, 1);
    auto tree = fit_tree(records, schema, config.tree);
    HumanModel model{simulate_editing(agent, tree_to_rules(tree, schema), schema), tree};
    auto own = simulate_decisions(agent, b2, 2);

    std::vector<ClEstimate> estimates;
    std::vector<ComplementaryLabel> cl_labels, conf_labels;
    double cl_sum = 0.0;
    std::size_t own_correct = 0;
    auto predictor = [&](const TaskInstance& t) { return predict_human(model, t).label; };
    for (std::size_t i = 0; i < b2.size(); ++i) {
        const auto& c = cases.batch2[i];
        auto human = estimate_human_cl(predictor, cases.neighbors2.at(i), cl_config.alpha);
        auto est = make_estimate(std::move(human), c.ai.confidence);
        const bool human_correct = own[i].human_decision == c.instance.label;
        auto outcome = outcome_of(human_correct, c.ai_correct);
        cl_labels.push_back({c.instance.id, compare(est.human_cl, est.ai_cl, cl_config.tie_policy), outcome});
        conf_labels.push_back({c.instance.id, confidence_router(c.ai.confidence, config.confidence_threshold), outcome});
        cl_sum += est.human_cl;
        own_correct += human_correct;
        estimates.push_back(std::move(est));
    }
    out.cl_router_recall = complementary_recall(cl_labels);
    out.confidence_router_recall = complementary_recall(conf_labels);
    out.mean_cl = cl_sum / static_cast<double>(b2.size());
    out.accuracy = static_cast<double>(own_correct) / static_cast<double>(b2.size());

    for (auto kind : kAllStrategies) {
        std::mt19937_64 rng(mix_seed(agent.seed, 200 + static_cast<std::uint64_t>(kind)));
        std::vector<TranscriptStep> transcript;
        for (std::size_t i = 0; i < b2.size(); ++i) {
            const auto& c = cases.batch2[i];
            const auto& est = estimates[i];
            const Label mine = own[i].human_decision;
            auto p = plan_step(kind, est, c.ai, cl_config.tie_policy);
            StepContent content{&c.instance, c.ai, est, std::nullopt};
            if (p.show_explanation) content.explanation = Explanation{};
            auto payload = render_payload(p, content, schema);
            auto view = view_of(payload);

            TranscriptStep step{c.instance.id, p, est.higher, {}};
            TrialLog log;
            log.participant = name;
            log.case_id = c.instance.id;
            log.condition = kind;
            log.truth = c.instance.label;
            if (kind != StrategyKind::HumanOnly) {
                log.ai_label = c.ai.label;
                log.ai_confidence = c.ai.confidence;
                log.ai_correct = c.ai_correct;
            }
            if (needs_cl_estimate(kind)) log.cl_estimate = est;

            Label final_decision = mine;
            if (view.require_pre) {
                log.human_pre_decision = mine;
                step.events.push_back({TranscriptEventKind::PreDecision, 1});
                auto reveal = render_reveal(p, content);
                if (reveal["ai"].contains("label")) step.events.push_back({TranscriptEventKind::AiReveal, 2});
                if (reveal["ai"].contains("confidence")) {
                    step.events.push_back({TranscriptEventKind::ConfidenceShown, 2});
                }
                step.events.push_back({TranscriptEventKind::FinalDecision, 3});
            } else {
                for (const auto& e : shown_events(payload, 0)) step.events.push_back(e);
                const bool gauges = view.human_cl && view.ai_cl;
                if (view.rec_visible && *view.rec != mine) {
                    if (gauges) {
                        if (*view.ai_cl > *view.human_cl && coin(rng, config.reliance.switch_on_cue)) {
                            final_decision = *view.rec;
                        }
                    } else if (coin(rng, config.reliance.adopt_shown)) {
                        final_decision = *view.rec;
                    }
                }
                step.events.push_back({TranscriptEventKind::FinalDecision, 1});
            }
            log.final_decision = final_decision;
            log.timing = {{"served", 0}, {"final", step.events.back().timestamp}};
            out.trials.push_back(std::move(log));
            transcript.push_back(std::move(step));
        }
        for (auto& v : validate_transcript(kind, transcript, cl_config.tie_policy)) {
            out.violations.push_back(name + " " + v);
        }
    }
    return out;
}

Spread spread(std::span<const std::optional<double>> values) {
    Spread s;
    double sum = 0.0;
    for (const auto& v : values) {
        if (!v) continue;
        sum += *v;
        ++s.n;
    }
    if (s.n == 0) return s;
    s.mean = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (const auto& v : values) {
        if (v) ss += (*v - *s.mean) * (*v - *s.mean);
    }
    s.stddev = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
    return s;
}

ReplicationResult run_replication(const ExperimentConfig& config, const SimCases& cases,
                                  const DatasetSplit& split, std::uint64_t seed) {
    ReplicationResult r;
    r.seed = seed;
    std::mt19937_64 rng(mix_seed(seed, 0));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::optional<double>> cl_recalls, conf_recalls;
    std::vector<TrialLog> trials;
    for (std::size_t a = 0; a < config.agents; ++a) {
        AgentParams params = config.agent_template;
        params.noise_rate = config.noise_min + (config.noise_max - config.noise_min) * u(rng);
        params.revision_fidelity = config.fidelity_min + (config.fidelity_max - config.fidelity_min) * u(rng);
        params.misconception_rate =
            config.misconception_min + (config.misconception_max - config.misconception_min) * u(rng);
        auto agent = make_agent(params, split, mix_seed(seed, 1000 + a));
        auto outcome = run_agent(agent, cases, split, config, "agent-" + std::to_string(a));
        cl_recalls.push_back(outcome.cl_router_recall);
        conf_recalls.push_back(outcome.confidence_router_recall);
        r.agent_mean_cl.push_back(outcome.mean_cl);
        r.agent_accuracy.push_back(outcome.accuracy);
        r.transcript_violations += outcome.violations.size();
        for (auto& t : outcome.trials) trials.push_back(std::move(t));
    }
    r.cl_router_recall = spread(cl_recalls).mean;
    r.confidence_router_recall = spread(conf_recalls).mean;
    if (r.agent_mean_cl.size() >= 3) r.pearson_r = pearson(r.agent_mean_cl, r.agent_accuracy);
    r.reports = build_reports(trials, config.confidence_threshold, config.cl.tie_policy);
    return r;
}

ReplicationResult run_replication(const ExperimentConfig& config, const DatasetSplit& split,
                                  const LinearClassifier& model, std::uint64_t seed) {
    return run_replication(config, prepare_cases(config, split, model, mix_seed(seed, 1)), split, seed);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetSplit& split,
                                const LinearClassifier& model) {
    validate(config);
    ExperimentResult result;
    result.replications.resize(config.replications);
    std::vector<std::string> errors(config.replications);

    auto work = [&](std::size_t i) {
        const std::uint64_t seed = mix_seed(config.seed, 5000 + i);
        try {
            result.replications[i] = run_replication(config, split, model, seed);
        } catch (const Error& e) {
            errors[i] = std::string(to_string(e.code())) + "|replication seed " + std::to_string(seed) + ": " +
                        e.what();
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, config.replications));
    if (threads == 1) {
        for (std::size_t i = 0; i < config.replications; ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < config.replications; i += threads) work(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (errors[i].empty()) continue;
        const auto bar = errors[i].find('|');
        const auto code_name = errors[i].substr(0, bar);
        ErrorCode code = ErrorCode::InvalidArgument;
        for (int c = 0; c <= static_cast<int>(ErrorCode::Unsatisfiable); ++c) {
            if (to_string(static_cast<ErrorCode>(c)) == code_name) code = static_cast<ErrorCode>(c);
        }
        throw Error(code, errors[i].substr(bar + 1));
    }

    std::vector<std::optional<double>> cl, conf, r;
    for (const auto& rep : result.replications) {
        cl.push_back(rep.cl_router_recall);
        conf.push_back(rep.confidence_router_recall);
        r.push_back(rep.pearson_r);
        if (rep.cl_router_recall && rep.confidence_router_recall &&
            *rep.cl_router_recall > *rep.confidence_router_recall) {
            ++result.cl_router_wins;
        }
        result.transcript_violations += rep.transcript_violations;
    }
    result.cl_router_recall = spread(cl);
    result.confidence_router_recall = spread(conf);
    result.pearson_r = spread(r);
    return result;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json spread_json(const Spread& s) {
    return {{"mean", opt(s.mean)}, {"stddev", opt(s.stddev)}, {"n", s.n}};
}

std::string fmt(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return buf;
}

}  // namespace

nlohmann::json to_json(const ExperimentResult& r) {
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& rep : r.replications) {
        nlohmann::json reports = nlohmann::json::array();
        for (const auto& m : rep.reports) reports.push_back(to_json(m));
        reps.push_back({{"seed", rep.seed},
                        {"cl_router_recall", opt(rep.cl_router_recall)},
                        {"confidence_router_recall", opt(rep.confidence_router_recall)},
                        {"pearson_r", opt(rep.pearson_r)},
                        {"agent_mean_cl", rep.agent_mean_cl},
                        {"agent_accuracy", rep.agent_accuracy},
                        {"transcript_violations", rep.transcript_violations},
                        {"reports", reports}});
    }
    return {{"replications", reps},
            {"aggregate",
             {{"cl_router_recall", spread_json(r.cl_router_recall)},
              {"confidence_router_recall", spread_json(r.confidence_router_recall)},
              {"pearson_r", spread_json(r.pearson_r)},
              {"cl_router_wins", r.cl_router_wins},
              {"transcript_violations", r.transcript_violations}}}};
}

std::string render_summary(const ExperimentResult& r) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-6s %20s %20s %10s %8s\n", "rep", "seed", "cl/conf recall", "pearson", "win");
    out << line;
    for (std::size_t i = 0; i < r.replications.size(); ++i) {
        const auto& rep = r.replications[i];
        const bool win = rep.cl_router_recall && rep.confidence_router_recall &&
                         *rep.cl_router_recall > *rep.confidence_router_recall;
        std::string recalls = fmt(rep.cl_router_recall) + " / " + fmt(rep.confidence_router_recall);
        std::snprintf(line, sizeof line, "%-6zu %20llu %20s %10s %8s\n", i,
                      static_cast<unsigned long long>(rep.seed), recalls.c_str(), fmt(rep.pearson_r).c_str(),
                      win ? "yes" : "no");
        out << line;
    }
    out << "\nmean CL-router recall:         " << fmt(r.cl_router_recall.mean) << " (sd "
        << fmt(r.cl_router_recall.stddev) << ")\n";
    out << "mean confidence-router recall: " << fmt(r.confidence_router_recall.mean) << " (sd "
        << fmt(r.confidence_router_recall.stddev) << ")\n";
    out << "CL router wins:                " << r.cl_router_wins << "/" << r.replications.size() << "\n";
    out << "mean pearson r:                " << fmt(r.pearson_r.mean) << "\n";
    out << "transcript violations:         " << r.transcript_violations << "\n";
    return out.str();
}

}  // namespace cltrust
