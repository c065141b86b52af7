#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cltrust/ai_model.hpp"
#include "cltrust/cl_engine.hpp"
#include "cltrust/human_model.hpp"
#include "cltrust/metrics.hpp"
#include "cltrust/strategy.hpp"

namespace cltrust {

enum class Stage { Intro, Batch1, RuleEditing, Batch2, Survey, Done };

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view text);

struct EventRecord {
    std::string session_id;
    std::uint64_t seq = 0;
    std::int64_t timestamp = 0;
    std::string kind;
    nlohmann::json payload;

    bool operator==(const EventRecord&) const = default;
};

nlohmann::json to_json(const EventRecord& e);
EventRecord event_from_json(const nlohmann::json& j);

class EventStore {
public:
    virtual ~EventStore() = default;
    // Durable when it returns.
    virtual void append(const EventRecord& event) = 0;
    virtual std::vector<EventRecord> load(const std::string& session_id) const = 0;
    virtual std::vector<std::string> sessions() const = 0;
};

class MemoryEventStore : public EventStore {
public:
    void append(const EventRecord& event) override;
    std::vector<EventRecord> load(const std::string& session_id) const override;
    std::vector<std::string> sessions() const override;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::vector<EventRecord>> events_;
};

// One JSON-lines file per session, fsync'd on every append.
class FileEventStore : public EventStore {
public:
    explicit FileEventStore(std::string directory);

    void append(const EventRecord& event) override;
    std::vector<EventRecord> load(const std::string& session_id) const override;
    std::vector<std::string> sessions() const override;

    const std::string& directory() const { return directory_; }

private:
    std::string path_for(const std::string& session_id) const;

    std::string directory_;
    mutable std::mutex mutex_;
};

struct ServedStep {
    TaskInstance instance;
    AiPrediction ai;
    Presentation presentation;
    std::optional<ClEstimate> cl;
    std::int64_t served_at = 0;
    std::optional<Label> pre_decision;
    std::optional<std::int64_t> pre_at;
    bool revealed = false;
};

struct Session {
    std::string id;
    std::string participant;
    StrategyKind condition = StrategyKind::HumanOnly;
    std::uint64_t seed = 0;
    Stage stage = Stage::Intro;
    std::array<std::vector<std::int64_t>, 2> order;
    std::size_t cursor = 0;
    std::optional<ServedStep> pending;
    std::vector<DecisionRecord> batch1_records;
    std::optional<DecisionTreeModel> tree;
    std::optional<RuleSet> ruleset;
    std::map<std::int64_t, ClEstimate> cl_cache;
    std::vector<TrialLog> trials;
    nlohmann::json survey = nlohmann::json::object();
    std::uint64_t next_seq = 0;
    std::int64_t last_timestamp = 0;
};

// Session state is a pure fold over its events.
void apply_event(Session& session, const EventRecord& event, const FeatureSchema& schema);
Session replay(const std::vector<EventRecord>& events, const FeatureSchema& schema);

nlohmann::json session_state_json(const Session& s, const FeatureSchema& schema);
std::uint64_t state_hash(const Session& s, const FeatureSchema& schema);

struct ServiceConfig {
    TreeConfig tree{3, 2};
    ClConfig cl;
    double confidence_threshold = 0.7;
    bool allow_duplicate_participants = false;
};

using Clock = std::function<std::int64_t()>;
Clock system_clock_ms();

struct DecisionSubmission {
    std::int64_t case_id = 0;
    Label decision = Label::AtMost50K;
    std::string phase = "final";  // "pre" or "final"
    std::optional<Perceived> perceived_higher;
};

class SessionService {
public:
    SessionService(const DatasetSplit& split, const LinearClassifier& model, const TaskCaseSet& cases,
                   std::shared_ptr<EventStore> store, ServiceConfig config = {}, Clock clock = system_clock_ms());

    // Returns the created session id.
    std::string create_session(const std::string& participant, StrategyKind condition, std::uint64_t seed);
    nlohmann::json next_step(const std::string& session_id);
    nlohmann::json submit_decision(const std::string& session_id, const DecisionSubmission& submission);
    nlohmann::json get_rules(const std::string& session_id) const;
    nlohmann::json put_edit(const std::string& session_id, const RuleEdit& edit);
    ConflictReport check(const std::string& session_id, const Rule& rule);
    nlohmann::json submit_survey(const std::string& session_id, const nlohmann::json& answers);

    nlohmann::json export_session(const std::string& session_id) const;
    nlohmann::json export_all() const;

    std::shared_ptr<const Session> snapshot(const std::string& session_id) const;
    std::vector<std::string> session_ids() const;
    const FeatureSchema& schema() const { return split_.schema(); }

private:
    struct Entry {
        std::mutex writer;
        mutable std::mutex snapshot_mutex;
        std::shared_ptr<const Session> state;
    };

    class WriteGuard;

    std::shared_ptr<Entry> entry(const std::string& session_id) const;
    void commit(Entry& entry, Session& working, const std::string& kind, nlohmann::json payload);
    nlohmann::json serve_case(Entry& entry, Session& working);
    nlohmann::json enter_stage(Entry& entry, Session& working, Stage next);
    const SelectedCase& find_case(std::int64_t id) const;

    const DatasetSplit& split_;
    const LinearClassifier& model_;
    std::map<std::int64_t, SelectedCase> cases_;
    std::array<std::vector<std::int64_t>, 2> batches_;
    std::shared_ptr<EventStore> store_;
    ServiceConfig config_;
    Clock clock_;

    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace cltrust
