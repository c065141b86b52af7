#include "cltrust/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "cltrust/error.hpp"
#include "cltrust/hashing.hpp"

namespace cltrust {

namespace fs = std::filesystem;

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::Intro: return "intro";
        case Stage::Batch1: return "batch1";
        case Stage::RuleEditing: return "rule_editing";
        case Stage::Batch2: return "batch2";
        case Stage::Survey: return "survey";
        case Stage::Done: return "done";
    }
    return "intro";
}

Stage stage_from_string(std::string_view text) {
    for (auto s : {Stage::Intro, Stage::Batch1, Stage::RuleEditing, Stage::Batch2, Stage::Survey, Stage::Done}) {
        if (to_string(s) == text) return s;
    }
    throw Error(ErrorCode::Parse, "unknown stage: " + std::string(text));
}

nlohmann::json to_json(const EventRecord& e) {
    return {{"session_id", e.session_id},
            {"seq", e.seq},
            {"timestamp", e.timestamp},
            {"kind", e.kind},
            {"payload", e.payload}};
}

EventRecord event_from_json(const nlohmann::json& j) {
    try {
        return {j.at("session_id").get<std::string>(), j.at("seq").get<std::uint64_t>(),
                j.at("timestamp").get<std::int64_t>(), j.at("kind").get<std::string>(), j.at("payload")};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("malformed event: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Stores

void MemoryEventStore::append(const EventRecord& event) {
    std::lock_guard lock(mutex_);
    events_[event.session_id].push_back(event);
}

std::vector<EventRecord> MemoryEventStore::load(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    auto it = events_.find(session_id);
    return it == events_.end() ? std::vector<EventRecord>{} : it->second;
}

std::vector<std::string> MemoryEventStore::sessions() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : events_) out.push_back(id);
    return out;
}

FileEventStore::FileEventStore(std::string directory) : directory_(std::move(directory)) {
    std::error_code ec;
    fs::create_directories(directory_, ec);
    if (ec || !fs::is_directory(directory_)) {
        throw Error(ErrorCode::Io, "cannot create data directory " + directory_);
    }
}

std::string FileEventStore::path_for(const std::string& session_id) const {
    if (session_id.empty() || !std::all_of(session_id.begin(), session_id.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
        })) {
        throw Error(ErrorCode::InvalidArgument, "invalid session id");
    }
    return (fs::path(directory_) / (session_id + ".jsonl")).string();
}

void FileEventStore::append(const EventRecord& event) {
    const auto path = path_for(event.session_id);
    std::string line = to_json(event).dump() + "\n";
    std::lock_guard lock(mutex_);
    const bool fresh = !fs::exists(path);
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::Io, "cannot open " + path + ": " + std::strerror(errno));
    std::size_t written = 0;
    while (written < line.size()) {
        ssize_t n = ::write(fd, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            throw Error(ErrorCode::Io, "write failed on " + path + ": " + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        ::close(fd);
        throw Error(ErrorCode::Io, "fsync failed on " + path);
    }
    ::close(fd);
    if (fresh) {
        int dfd = ::open(directory_.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
        if (dfd >= 0) {
            ::fsync(dfd);
            ::close(dfd);
        }
    }
}

std::vector<EventRecord> FileEventStore::load(const std::string& session_id) const {
    const auto path = path_for(session_id);
    std::lock_guard lock(mutex_);
    std::vector<EventRecord> out;
    std::ifstream in(path);
    if (!in) return out;
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) lines.push_back(std::move(line));
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto j = nlohmann::json::parse(lines[i], nullptr, false);
        if (j.is_discarded()) {
            // A torn final line was never acknowledged.
            if (i + 1 == lines.size()) break;
            throw Error(ErrorCode::Parse, path + ": corrupt event on line " + std::to_string(i + 1));
        }
        out.push_back(event_from_json(j));
    }
    return out;
}

std::vector<std::string> FileEventStore::sessions() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(directory_)) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path().stem().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Fold

namespace {

std::size_t batch_index(Stage s) { return s == Stage::Batch1 ? 0 : 1; }

void fold(Session& s, const EventRecord& e, const FeatureSchema& schema) {
    const auto& p = e.payload;
    if (e.kind == "stage_enter") {
        Stage next = stage_from_string(p.at("stage").get<std::string>());
        if (next == Stage::Intro) {
            if (e.seq != 0) throw Error(ErrorCode::Parse, "intro must be the first event");
            s.id = e.session_id;
            s.participant = p.at("participant").get<std::string>();
            s.condition = strategy_from_string(p.at("condition").get<std::string>());
            s.seed = p.at("seed").get<std::uint64_t>();
            s.order[0] = p.at("order").at(0).get<std::vector<std::int64_t>>();
            s.order[1] = p.at("order").at(1).get<std::vector<std::int64_t>>();
        } else if (static_cast<int>(next) != static_cast<int>(s.stage) + 1) {
            throw Error(ErrorCode::Parse, "stage " + std::string(to_string(next)) + " cannot follow " +
                                              std::string(to_string(s.stage)));
        }
        if (next == Stage::RuleEditing) {
            s.tree = tree_from_json(p.at("tree"), schema);
            s.ruleset = ruleset_from_json(p.at("ruleset"), schema);
        }
        s.stage = next;
        s.cursor = 0;
        s.pending.reset();
    } else if (e.kind == "presentation_served") {
        if (p.at("phase").get<std::string>() == "reveal") {
            if (!s.pending) throw Error(ErrorCode::Parse, "reveal without a served case");
            s.pending->revealed = true;
        } else {
            ServedStep step;
            step.instance = instance_from_json(p.at("case"), schema);
            step.ai = prediction_from_json(p.at("ai"));
            step.presentation = presentation_from_json(p.at("presentation"));
            if (p.contains("cl")) {
                step.cl = cl_estimate_from_json(p.at("cl"));
                s.cl_cache[step.instance.id] = *step.cl;
            }
            step.served_at = e.timestamp;
            s.pending = std::move(step);
        }
    } else if (e.kind == "decision_submitted") {
        if (!s.pending) throw Error(ErrorCode::Parse, "decision without a served case");
        auto& step = *s.pending;
        Label decision = label_from_string(p.at("decision").get<std::string>());
        if (p.at("phase").get<std::string>() == "pre") {
            step.pre_decision = decision;
            step.pre_at = e.timestamp;
        } else {
            if (s.stage == Stage::Batch1) {
                s.batch1_records.push_back({step.instance, decision, e.timestamp});
            } else {
                TrialLog log;
                log.participant = s.participant;
                log.case_id = step.instance.id;
                log.condition = s.condition;
                if (s.condition != StrategyKind::HumanOnly) {
                    log.ai_label = step.ai.label;
                    log.ai_confidence = step.ai.confidence;
                    log.ai_correct = step.ai.label == step.instance.label;
                }
                log.human_pre_decision = step.pre_decision;
                log.final_decision = decision;
                log.truth = step.instance.label;
                log.cl_estimate = step.cl;
                if (p.contains("perceived_higher")) {
                    log.perceived_higher = perceived_from_string(p.at("perceived_higher").get<std::string>());
                }
                log.timing.emplace_back("served", step.served_at);
                if (step.pre_at) log.timing.emplace_back("pre", *step.pre_at);
                log.timing.emplace_back("final", e.timestamp);
                s.trials.push_back(std::move(log));
            }
            ++s.cursor;
            s.pending.reset();
        }
    } else if (e.kind == "rule_edit") {
        if (!s.ruleset) throw Error(ErrorCode::Parse, "rule edit before rules exist");
        s.ruleset = apply_edit(*s.ruleset, edit_from_json(p.at("edit"), schema), schema);
    } else if (e.kind == "rule_check") {
        // Audit only.
    } else if (e.kind == "survey_answer") {
        for (const auto& [k, v] : p.at("answers").items()) s.survey[k] = v;
    } else {
        throw Error(ErrorCode::Parse, "unknown event kind: " + e.kind);
    }
}

}  // namespace

void apply_event(Session& session, const EventRecord& event, const FeatureSchema& schema) {
    if (event.seq != session.next_seq) {
        throw Error(ErrorCode::Parse, "event sequence gap: expected " + std::to_string(session.next_seq) + ", got " +
                                          std::to_string(event.seq));
    }
    if (event.seq > 0 && event.session_id != session.id) {
        throw Error(ErrorCode::Parse, "event belongs to session " + event.session_id);
    }
    try {
        fold(session, event, schema);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, "malformed " + event.kind + " event: " + e.what());
    }
    session.next_seq = event.seq + 1;
    session.last_timestamp = std::max(session.last_timestamp, event.timestamp);
}

Session replay(const std::vector<EventRecord>& events, const FeatureSchema& schema) {
    if (events.empty()) throw Error(ErrorCode::Parse, "no events to replay");
    Session s;
    for (const auto& e : events) apply_event(s, e, schema);
    return s;
}

nlohmann::json session_state_json(const Session& s, const FeatureSchema& schema) {
    nlohmann::json j{{"id", s.id},
                     {"participant", s.participant},
                     {"condition", std::string(to_string(s.condition))},
                     {"seed", s.seed},
                     {"stage", std::string(to_string(s.stage))},
                     {"order", {s.order[0], s.order[1]}},
                     {"cursor", s.cursor},
                     {"next_seq", s.next_seq},
                     {"last_timestamp", s.last_timestamp},
                     {"survey", s.survey}};
    if (s.pending) {
        const auto& p = *s.pending;
        nlohmann::json pj{{"case", instance_to_json(p.instance, schema)},
                          {"ai", to_json(p.ai)},
                          {"presentation", to_json(p.presentation)},
                          {"served_at", p.served_at},
                          {"revealed", p.revealed}};
        if (p.cl) pj["cl"] = to_json(*p.cl);
        if (p.pre_decision) pj["pre_decision"] = std::string(to_string(*p.pre_decision));
        if (p.pre_at) pj["pre_at"] = *p.pre_at;
        j["pending"] = pj;
    } else {
        j["pending"] = nullptr;
    }
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : s.batch1_records) {
        records.push_back({{"case", instance_to_json(r.instance, schema)},
                           {"decision", std::string(to_string(r.human_decision))},
                           {"timestamp", r.timestamp}});
    }
    j["batch1_records"] = records;
    j["tree"] = s.tree ? to_json(*s.tree, schema) : nlohmann::json(nullptr);
    j["ruleset"] = s.ruleset ? to_json(*s.ruleset, schema) : nlohmann::json(nullptr);
    nlohmann::json cache = nlohmann::json::object();
    for (const auto& [id, est] : s.cl_cache) cache[std::to_string(id)] = to_json(est);
    j["cl_cache"] = cache;
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : s.trials) trials.push_back(to_json(t));
    j["trials"] = trials;
    return j;
}

std::uint64_t state_hash(const Session& s, const FeatureSchema& schema) {
    return fnv1a64(session_state_json(s, schema).dump());
}

Clock system_clock_ms() {
    return [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    };
}

// ---------------------------------------------------------------------------
// Service

class SessionService::WriteGuard {
public:
    WriteGuard(Entry& entry, const std::string& id) : lock_(entry.writer, std::try_to_lock) {
        if (!lock_.owns_lock()) {
            throw Error(ErrorCode::Conflict, "session " + id + " is busy with another request");
        }
    }

private:
    std::unique_lock<std::mutex> lock_;
};

SessionService::SessionService(const DatasetSplit& split, const LinearClassifier& model, const TaskCaseSet& cases,
                               std::shared_ptr<EventStore> store, ServiceConfig config, Clock clock)
    : split_(split), model_(model), store_(std::move(store)), config_(std::move(config)), clock_(std::move(clock)) {
    if (cases.batches.size() != 2) throw Error(ErrorCode::InvalidArgument, "the protocol needs two case batches");
    if (!store_) throw Error(ErrorCode::InvalidArgument, "no event store");
    for (std::size_t b = 0; b < 2; ++b) {
        if (cases.batches[b].empty()) throw Error(ErrorCode::InvalidArgument, "empty case batch");
        for (const auto& c : cases.batches[b]) {
            if (!cases_.emplace(c.instance.id, c).second) {
                throw Error(ErrorCode::InvalidArgument, "case " + std::to_string(c.instance.id) + " appears twice");
            }
            batches_[b].push_back(c.instance.id);
        }
    }
    config_.cl = resolve_alpha(config_.cl, split_);
    for (const auto& id : store_->sessions()) {
        auto events = store_->load(id);
        if (events.empty()) continue;
        auto e = std::make_shared<Entry>();
        e->state = std::make_shared<const Session>(replay(events, split_.schema()));
        sessions_[id] = std::move(e);
    }
}

std::shared_ptr<SessionService::Entry> SessionService::entry(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "unknown session " + session_id);
    return it->second;
}

std::shared_ptr<const Session> SessionService::snapshot(const std::string& session_id) const {
    auto e = entry(session_id);
    std::lock_guard lock(e->snapshot_mutex);
    return e->state;
}

std::vector<std::string> SessionService::session_ids() const {
    std::shared_lock lock(sessions_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sessions_) out.push_back(id);
    return out;
}

const SelectedCase& SessionService::find_case(std::int64_t id) const {
    auto it = cases_.find(id);
    if (it == cases_.end()) throw Error(ErrorCode::NotFound, "unknown case " + std::to_string(id));
    return it->second;
}

void SessionService::commit(Entry& entry, Session& working, const std::string& kind, nlohmann::json payload) {
    EventRecord e{working.id, working.next_seq, std::max(clock_(), working.last_timestamp), kind, std::move(payload)};
    Session next = working;
    apply_event(next, e, split_.schema());
    store_->append(e);
    working = std::move(next);
    std::lock_guard lock(entry.snapshot_mutex);
    entry.state = std::make_shared<const Session>(working);
}

std::string SessionService::create_session(const std::string& participant, StrategyKind condition,
                                           std::uint64_t seed) {
    if (participant.empty()) throw Error(ErrorCode::InvalidArgument, "participant id is required");
    std::unique_lock lock(sessions_mutex_);
    if (!config_.allow_duplicate_participants) {
        for (const auto& [id, e] : sessions_) {
            std::lock_guard sl(e->snapshot_mutex);
            if (e->state->participant == participant && e->state->condition == condition) {
                throw Error(ErrorCode::Duplicate, "participant " + participant + " already has a " +
                                                      std::string(to_string(condition)) + " session");
            }
        }
    }
    std::string id;
    for (std::uint64_t salt = sessions_.size();; ++salt) {
        id = "s" + to_hex(fnv1a64(participant + "\x1f" + std::string(to_string(condition)) + "\x1f" +
                                  std::to_string(seed) + "\x1f" + std::to_string(salt)))
                       .substr(0, 12);
        if (!sessions_.count(id)) break;
    }

    std::array<std::vector<std::int64_t>, 2> order = batches_;
    for (std::size_t b = 0; b < 2; ++b) {
        std::mt19937_64 rng(mix_seed(seed, b));
        std::shuffle(order[b].begin(), order[b].end(), rng);
    }

    auto e = std::make_shared<Entry>();
    Session working;
    working.id = id;
    e->state = std::make_shared<const Session>(working);
    commit(*e, working, "stage_enter",
           {{"stage", "intro"},
            {"participant", participant},
            {"condition", std::string(to_string(condition))},
            {"seed", seed},
            {"order", {order[0], order[1]}}});
    sessions_[id] = std::move(e);
    return id;
}

nlohmann::json SessionService::enter_stage(Entry& entry, Session& working, Stage next) {
    nlohmann::json payload{{"stage", std::string(to_string(next))}};
    nlohmann::json response{{"stage", std::string(to_string(next))}, {"stage_changed", true}};
    if (next == Stage::RuleEditing) {
        auto tree = fit_tree(working.batch1_records, split_.schema(), config_.tree);
        auto rules = tree_to_rules(tree, split_.schema());
        payload["tree"] = to_json(tree, split_.schema());
        payload["ruleset"] = to_json(rules, split_.schema());
        response["ruleset"] = payload["ruleset"];
    }
    if (next == Stage::Batch1 || next == Stage::Batch2) response["cases"] = working.order[batch_index(next)].size();
    commit(entry, working, "stage_enter", std::move(payload));
    return response;
}

nlohmann::json SessionService::serve_case(Entry& entry, Session& working) {
    const std::size_t b = batch_index(working.stage);
    const auto& c = find_case(working.order[b][working.cursor]);
    Presentation p = unassisted();
    std::optional<ClEstimate> cl;
    std::optional<Explanation> explanation;
    if (working.stage == Stage::Batch2) {
        if (needs_cl_estimate(working.condition)) {
            auto hit = working.cl_cache.find(c.instance.id);
            if (hit != working.cl_cache.end()) {
                cl = hit->second;
            } else {
                HumanModel model{*working.ruleset, *working.tree};
                cl = make_estimate(estimate_human_cl(model, c.instance, split_, config_.cl), c.ai.confidence);
            }
        }
        p = plan_step(working.condition, cl, c.ai, config_.cl.tie_policy);
        if (p.show_explanation) explanation = explain(model_, c.instance, split_);
    }
    nlohmann::json audit{{"phase", "initial"},
                         {"case", instance_to_json(c.instance, split_.schema())},
                         {"ai", to_json(c.ai)},
                         {"presentation", to_json(p)}};
    if (cl) audit["cl"] = to_json(*cl);
    commit(entry, working, "presentation_served", std::move(audit));

    StepContent content{&c.instance, c.ai, cl, explanation};
    auto payload = render_payload(p, content, split_.schema());
    payload["stage"] = std::string(to_string(working.stage));
    payload["step"] = working.cursor + 1;
    payload["of"] = working.order[b].size();
    return payload;
}

nlohmann::json SessionService::next_step(const std::string& session_id) {
    auto e = entry(session_id);
    WriteGuard guard(*e, session_id);
    Session working = *snapshot(session_id);
    switch (working.stage) {
        case Stage::Intro: return enter_stage(*e, working, Stage::Batch1);
        case Stage::RuleEditing: return enter_stage(*e, working, Stage::Batch2);
        case Stage::Survey: return enter_stage(*e, working, Stage::Done);
        case Stage::Done: return {{"stage", "done"}, {"stage_changed", false}};
        case Stage::Batch1:
        case Stage::Batch2: break;
    }
    if (working.pending) {
        throw Error(ErrorCode::Protocol, "case " + std::to_string(working.pending->instance.id) +
                                             " is still awaiting a final decision");
    }
    const std::size_t b = batch_index(working.stage);
    if (working.cursor >= working.order[b].size()) {
        return enter_stage(*e, working, working.stage == Stage::Batch1 ? Stage::RuleEditing : Stage::Survey);
    }
    return serve_case(*e, working);
}

nlohmann::json SessionService::submit_decision(const std::string& session_id, const DecisionSubmission& sub) {
    auto e = entry(session_id);
    WriteGuard guard(*e, session_id);
    Session working = *snapshot(session_id);
    if (working.stage != Stage::Batch1 && working.stage != Stage::Batch2) {
        throw Error(ErrorCode::Stage, "decisions are not accepted in stage " + std::string(to_string(working.stage)));
    }
    if (sub.phase != "pre" && sub.phase != "final") {
        throw Error(ErrorCode::InvalidArgument, "phase must be pre or final");
    }
    const auto& order = working.order[batch_index(working.stage)];
    const auto done_end = order.begin() + static_cast<std::ptrdiff_t>(working.cursor);
    if (std::find(order.begin(), done_end, sub.case_id) != done_end) {
        throw Error(ErrorCode::Duplicate, "case " + std::to_string(sub.case_id) + " already has a final decision");
    }
    if (!working.pending) throw Error(ErrorCode::Protocol, "no case has been served");
    auto& step = *working.pending;
    if (step.instance.id != sub.case_id) {
        throw Error(ErrorCode::Protocol, "case " + std::to_string(sub.case_id) + " is not the current case (" +
                                             std::to_string(step.instance.id) + ")");
    }

    nlohmann::json payload{{"case_id", sub.case_id},
                           {"decision", std::string(to_string(sub.decision))},
                           {"phase", sub.phase}};
    nlohmann::json ack{{"accepted", true}, {"case_id", sub.case_id}, {"phase", sub.phase}};
    if (sub.phase == "pre") {
        if (!step.presentation.require_pre_decision) {
            throw Error(ErrorCode::Protocol, "condition " + std::string(to_string(working.condition)) +
                                                 " does not ask for a pre-decision here");
        }
        if (step.pre_decision) throw Error(ErrorCode::Duplicate, "pre-decision already recorded");
        const Presentation presentation = step.presentation;
        const auto c = find_case(sub.case_id);
        commit(*e, working, "decision_submitted", std::move(payload));
        StepContent content{&c.instance, c.ai, working.pending->cl, std::nullopt};
        ack["reveal"] = render_reveal(presentation, content)["ai"];
        commit(*e, working, "presentation_served", {{"phase", "reveal"}, {"case_id", sub.case_id}});
        return ack;
    }
    if (step.presentation.require_pre_decision && !step.pre_decision) {
        throw Error(ErrorCode::Protocol, "final decision submitted before the required pre-decision");
    }
    if (sub.perceived_higher) payload["perceived_higher"] = std::string(to_string(*sub.perceived_higher));
    commit(*e, working, "decision_submitted", std::move(payload));
    ack["remaining"] = order.size() - working.cursor;
    return ack;
}

namespace {

void require_stage(const Session& s, Stage stage) {
    if (s.stage != stage) {
        throw Error(ErrorCode::Stage, "session is in stage " + std::string(to_string(s.stage)) + ", not " +
                                          std::string(to_string(stage)));
    }
}

}  // namespace

nlohmann::json SessionService::get_rules(const std::string& session_id) const {
    auto s = snapshot(session_id);
    require_stage(*s, Stage::RuleEditing);
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : s->batch1_records) {
        auto c = instance_to_json(r.instance, split_.schema());
        c.erase("label");
        records.push_back({{"case", c}, {"decision", std::string(to_string(r.human_decision))}});
    }
    return {{"ruleset", to_json(*s->ruleset, split_.schema())}, {"records", records}};
}

nlohmann::json SessionService::put_edit(const std::string& session_id, const RuleEdit& edit) {
    auto e = entry(session_id);
    WriteGuard guard(*e, session_id);
    Session working = *snapshot(session_id);
    require_stage(working, Stage::RuleEditing);
    apply_edit(*working.ruleset, edit, split_.schema());
    commit(*e, working, "rule_edit", {{"edit", to_json(edit, split_.schema())}});
    return {{"ruleset", to_json(*working.ruleset, split_.schema())}};
}

ConflictReport SessionService::check(const std::string& session_id, const Rule& rule) {
    auto e = entry(session_id);
    WriteGuard guard(*e, session_id);
    Session working = *snapshot(session_id);
    require_stage(working, Stage::RuleEditing);
    validate_rule(rule, split_.schema());
    auto report = check_rule(rule, working.batch1_records, *working.ruleset, split_.schema());
    commit(*e, working, "rule_check", {{"rule", to_json(rule, split_.schema())}, {"report", to_json(report)}});
    return report;
}

nlohmann::json SessionService::submit_survey(const std::string& session_id, const nlohmann::json& answers) {
    if (!answers.is_object() || answers.empty()) {
        throw Error(ErrorCode::InvalidArgument, "survey answers must be a non-empty object");
    }
    auto e = entry(session_id);
    WriteGuard guard(*e, session_id);
    Session working = *snapshot(session_id);
    require_stage(working, Stage::Survey);
    commit(*e, working, "survey_answer", {{"answers", answers}});
    return {{"accepted", true}, {"answered", working.survey.size()}};
}

nlohmann::json SessionService::export_session(const std::string& session_id) const {
    auto s = snapshot(session_id);
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : store_->load(session_id)) {
        if (e.seq < s->next_seq) events.push_back(to_json(e));
    }
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : s->trials) trials.push_back(to_json(t));
    return {{"session_id", session_id},
            {"state_hash", to_hex(state_hash(*s, split_.schema()))},
            {"trial_logs", trials},
            {"events", events}};
}

nlohmann::json SessionService::export_all() const {
    nlohmann::json sessions = nlohmann::json::array();
    nlohmann::json trials = nlohmann::json::array();
    nlohmann::json events = nlohmann::json::array();
    for (const auto& id : session_ids()) {
        auto one = export_session(id);
        for (auto& t : one["trial_logs"]) trials.push_back(t);
        for (auto& e : one["events"]) events.push_back(e);
        sessions.push_back(std::move(one));
    }
    return {{"sessions", sessions}, {"trial_logs", trials}, {"events", events}};
}

}  // namespace cltrust
