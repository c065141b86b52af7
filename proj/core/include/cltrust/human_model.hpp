#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cltrust/dataset.hpp"

namespace cltrust {

struct DecisionRecord {
    TaskInstance instance;
    Label human_decision = Label::AtMost50K;
    std::int64_t timestamp = 0;
};

// ---------------------------------------------------------------------------
// Decision tree

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    bool categorical = false;
    double threshold = 0.0;  // numeric: left iff value <= threshold
    int category = -1;       // categorical: left iff value == category
    int left = -1;
    int right = -1;
    Label leaf_class = Label::AtMost50K;
    std::array<std::size_t, 2> counts{};

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTreeModel {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    Label predict(const TaskInstance& instance) const;
    std::size_t leaf_index(const TaskInstance& instance) const;
    std::size_t leaf_count() const;
    std::size_t depth() const;
};

struct TreeConfig {
    std::size_t max_depth = 0;  // 0 = unlimited
    std::size_t min_leaf = 1;
};

// Greedy CART with Gini impurity. Numeric thresholds sit at midpoints between
// sorted distinct values; categorical splits are one-vs-rest. Equal gains keep
// the earlier feature, then the smaller threshold or category code.
DecisionTreeModel fit_tree(std::span<const DecisionRecord> records, const FeatureSchema& schema,
                           const TreeConfig& config = {});

// ---------------------------------------------------------------------------
// Rules

enum class Op { Lt, Le, Gt, Ge, Eq, In };

std::string_view to_string(Op op);
Op op_from_string(std::string_view text);

struct Condition {
    std::size_t feature = 0;
    Op op = Op::Le;
    double threshold = 0.0;       // numeric operators
    std::vector<int> categories;  // Eq holds exactly one code, In one or more

    bool matches(const TaskInstance& instance) const;
    bool operator==(const Condition&) const = default;
};

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    bool lo_closed = false;
    double hi = std::numeric_limits<double>::infinity();
    bool hi_closed = false;

    bool empty() const { return lo > hi || (lo == hi && !(lo_closed && hi_closed)); }
};

// A conjunction of conditions viewed as a box over the feature domains.
class Region {
public:
    static Region full(const FeatureSchema& schema);

    void restrict(const Condition& c);
    Region intersect(const Region& other) const;
    bool empty() const;
    // First feature whose constraint is empty.
    std::optional<std::size_t> empty_feature() const;
    bool contains(const TaskInstance& instance) const;
    // Merged conditions; a full region renders as one full-domain bound.
    std::vector<Condition> to_conditions(const FeatureSchema& schema) const;

private:
    std::vector<FeatureKind> kinds_;
    std::vector<Interval> intervals_;
    std::vector<std::vector<bool>> allowed_;
    std::vector<Interval> domain_;
};

Region region_of(std::span<const Condition> conditions, const FeatureSchema& schema);

struct Rule {
    int id = 0;
    std::vector<Condition> conditions;
    Label prediction = Label::AtMost50K;
    int priority = 0;

    bool matches(const TaskInstance& instance) const;
    bool operator==(const Rule&) const = default;
};

// Throws TypeError for operator/kind mismatches or bad category references and
// Unsatisfiable when the conjunction is empty over the domains.
void validate_rule(const Rule& rule, const FeatureSchema& schema);

enum class RuleOrigin { Initialized, Edited };

struct RuleEdit {
    enum class Kind { Add, Delete, Modify, Reorder };
    Kind kind = Kind::Add;
    std::optional<int> rule_id;
    std::optional<std::vector<Condition>> conditions;
    std::optional<Label> prediction;
    std::optional<int> priority;  // Add: 1-based insert position
    std::vector<int> order;       // Reorder: every rule id, top priority first

    bool operator==(const RuleEdit&) const = default;
};

struct RulePrediction {
    Label label;
    int rule_id;
};

struct RuleSet {
    std::vector<Rule> rules;  // ascending priority, priorities 1..k
    RuleOrigin origin = RuleOrigin::Initialized;
    std::vector<RuleEdit> history;

    std::optional<RulePrediction> predict(const TaskInstance& instance) const;
    const Rule* find(int id) const;
};

RuleSet tree_to_rules(const DecisionTreeModel& tree, const FeatureSchema& schema);

// Returns a new rule set; the input is left untouched.
RuleSet apply_edit(const RuleSet& ruleset, const RuleEdit& edit, const FeatureSchema& schema);

struct ConflictReport {
    std::vector<std::int64_t> history_conflicts;  // instance ids
    std::vector<int> rule_conflicts;              // rule ids

    bool empty() const { return history_conflicts.empty() && rule_conflicts.empty(); }
};

bool regions_overlap(const Rule& a, const Rule& b, const FeatureSchema& schema);

ConflictReport check_rule(const Rule& rule, std::span<const DecisionRecord> records,
                          const RuleSet& ruleset, const FeatureSchema& schema);

struct HumanModel {
    RuleSet ruleset;
    DecisionTreeModel fallback;
};

struct HumanPrediction {
    Label label = Label::AtMost50K;
    std::optional<int> rule_id;  // nullopt: fallback tree
};

HumanPrediction predict_human(const HumanModel& model, const TaskInstance& instance);

// Wire format shared with the web client.
nlohmann::json to_json(const Condition& c, const FeatureSchema& schema);
Condition condition_from_json(const nlohmann::json& j, const FeatureSchema& schema);
nlohmann::json to_json(const Rule& r, const FeatureSchema& schema);
Rule rule_from_json(const nlohmann::json& j, const FeatureSchema& schema);
nlohmann::json to_json(const RuleEdit& e, const FeatureSchema& schema);
RuleEdit edit_from_json(const nlohmann::json& j, const FeatureSchema& schema);
nlohmann::json to_json(const RuleSet& rs, const FeatureSchema& schema);
RuleSet ruleset_from_json(const nlohmann::json& j, const FeatureSchema& schema);
nlohmann::json to_json(const DecisionTreeModel& tree, const FeatureSchema& schema);
DecisionTreeModel tree_from_json(const nlohmann::json& j, const FeatureSchema& schema);
nlohmann::json to_json(const ConflictReport& r);

}  // namespace cltrust
