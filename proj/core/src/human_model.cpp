#include "cltrust/human_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "cltrust/error.hpp"

namespace cltrust {

// ---------------------------------------------------------------------------
// Tree

Label DecisionTreeModel::predict(const TaskInstance& instance) const {
    return nodes.at(leaf_index(instance)).leaf_class;
}

std::size_t DecisionTreeModel::leaf_index(const TaskInstance& instance) const {
    if (nodes.empty()) throw Error(ErrorCode::InvalidArgument, "empty decision tree");
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        double v = instance.values.at(static_cast<std::size_t>(n.feature));
        bool go_left = n.categorical ? static_cast<int>(v) == n.category : v <= n.threshold;
        i = static_cast<std::size_t>(go_left ? n.left : n.right);
    }
    return i;
}

std::size_t DecisionTreeModel::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t DecisionTreeModel::depth() const {
    std::function<std::size_t(int)> rec = [&](int i) -> std::size_t {
        const auto& n = nodes.at(static_cast<std::size_t>(i));
        if (n.is_leaf()) return 0;
        return 1 + std::max(rec(n.left), rec(n.right));
    };
    return nodes.empty() ? 0 : rec(0);
}

namespace {

double gini(std::size_t neg, std::size_t pos) {
    const double n = static_cast<double>(neg + pos);
    if (n == 0) return 0.0;
    const double p = static_cast<double>(pos) / n;
    return 2.0 * p * (1.0 - p);
}

struct SplitChoice {
    double gain = 0.0;
    int feature = -1;
    bool categorical = false;
    double threshold = 0.0;
    int category = -1;
};

class TreeBuilder {
public:
    TreeBuilder(std::span<const DecisionRecord> records, const FeatureSchema& schema,
                const TreeConfig& config)
        : records_(records), schema_(schema), config_(config) {}

    DecisionTreeModel build() {
        std::vector<std::size_t> all(records_.size());
        std::iota(all.begin(), all.end(), 0);
        grow(all, 0);
        return std::move(tree_);
    }

private:
    static constexpr double kEps = 1e-12;

    int grow(const std::vector<std::size_t>& rows, std::size_t depth) {
        int index = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        std::array<std::size_t, 2> counts{};
        for (auto r : rows) ++counts[static_cast<std::size_t>(records_[r].human_decision)];
        tree_.nodes[index].counts = counts;
        tree_.nodes[index].leaf_class = counts[1] > counts[0] ? Label::Over50K : Label::AtMost50K;

        const bool depth_ok = config_.max_depth == 0 || depth < config_.max_depth;
        const std::size_t min_leaf = std::max<std::size_t>(1, config_.min_leaf);
        if (!depth_ok || counts[0] == 0 || counts[1] == 0 || rows.size() < 2 * min_leaf) return index;

        auto best = find_split(rows, counts, min_leaf);
        if (best.feature < 0) return index;

        std::vector<std::size_t> left, right;
        for (auto r : rows) {
            double v = records_[r].instance.values[static_cast<std::size_t>(best.feature)];
            bool go_left = best.categorical ? static_cast<int>(v) == best.category : v <= best.threshold;
            (go_left ? left : right).push_back(r);
        }
        int l = grow(left, depth + 1);
        int rr = grow(right, depth + 1);
        auto& node = tree_.nodes[index];
        node.feature = best.feature;
        node.categorical = best.categorical;
        node.threshold = best.threshold;
        node.category = best.category;
        node.left = l;
        node.right = rr;
        return index;
    }

    SplitChoice find_split(const std::vector<std::size_t>& rows, const std::array<std::size_t, 2>& counts,
                           std::size_t min_leaf) const {
        const double n = static_cast<double>(rows.size());
        const double parent = gini(counts[0], counts[1]);
        SplitChoice best;
        auto consider = [&](double gain, const SplitChoice& cand) {
            if (gain > kEps && gain > best.gain + kEps) {
                best = cand;
                best.gain = gain;
            }
        };
        for (std::size_t f = 0; f < schema_.size(); ++f) {
            const auto& feat = schema_.feature(f);
            if (feat.kind == FeatureKind::Numeric) {
                std::vector<std::pair<double, Label>> v;
                v.reserve(rows.size());
                for (auto r : rows) v.emplace_back(records_[r].instance.values[f], records_[r].human_decision);
                std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
                std::array<std::size_t, 2> left{};
                for (std::size_t i = 0; i + 1 < v.size(); ++i) {
                    ++left[static_cast<std::size_t>(v[i].second)];
                    if (v[i].first == v[i + 1].first) continue;
                    std::size_t nl = i + 1, nr = v.size() - nl;
                    if (nl < min_leaf || nr < min_leaf) continue;
                    std::array<std::size_t, 2> right{counts[0] - left[0], counts[1] - left[1]};
                    double child = static_cast<double>(nl) / n * gini(left[0], left[1]) +
                                   static_cast<double>(nr) / n * gini(right[0], right[1]);
                    SplitChoice c;
                    c.feature = static_cast<int>(f);
                    c.threshold = 0.5 * (v[i].first + v[i + 1].first);
                    consider(parent - child, c);
                }
            } else {
                std::vector<std::array<std::size_t, 2>> per(feat.categories.size());
                for (auto r : rows) {
                    ++per[static_cast<std::size_t>(records_[r].instance.values[f])]
                         [static_cast<std::size_t>(records_[r].human_decision)];
                }
                for (std::size_t k = 0; k < per.size(); ++k) {
                    std::size_t nl = per[k][0] + per[k][1];
                    std::size_t nr = rows.size() - nl;
                    if (nl < min_leaf || nr < min_leaf) continue;
                    double child = static_cast<double>(nl) / n * gini(per[k][0], per[k][1]) +
                                   static_cast<double>(nr) / n * gini(counts[0] - per[k][0], counts[1] - per[k][1]);
                    SplitChoice c;
                    c.feature = static_cast<int>(f);
                    c.categorical = true;
                    c.category = static_cast<int>(k);
                    consider(parent - child, c);
                }
            }
        }
        return best;
    }

    std::span<const DecisionRecord> records_;
    const FeatureSchema& schema_;
    TreeConfig config_;
    DecisionTreeModel tree_;
};

}  // namespace

DecisionTreeModel fit_tree(std::span<const DecisionRecord> records, const FeatureSchema& schema,
                           const TreeConfig& config) {
    if (records.empty()) throw Error(ErrorCode::InvalidArgument, "no decision records to fit");
    for (const auto& r : records) {
        if (r.instance.values.size() != schema.size()) {
            throw Error(ErrorCode::InvalidArgument, "decision record does not match schema");
        }
    }
    return TreeBuilder(records, schema, config).build();
}

// ---------------------------------------------------------------------------
// Conditions and regions

std::string_view to_string(Op op) {
    switch (op) {
        case Op::Lt: return "<";
        case Op::Le: return "<=";
        case Op::Gt: return ">";
        case Op::Ge: return ">=";
        case Op::Eq: return "=";
        case Op::In: return "in";
    }
    return "?";
}

Op op_from_string(std::string_view text) {
    if (text == "<") return Op::Lt;
    if (text == "<=" || text == "≤") return Op::Le;
    if (text == ">") return Op::Gt;
    if (text == ">=" || text == "≥") return Op::Ge;
    if (text == "=" || text == "==") return Op::Eq;
    if (text == "in" || text == "∈") return Op::In;
    throw Error(ErrorCode::TypeError, "unknown operator: " + std::string(text));
}

namespace {

bool numeric_op(Op op) { return op == Op::Lt || op == Op::Le || op == Op::Gt || op == Op::Ge; }

}  // namespace

bool Condition::matches(const TaskInstance& instance) const {
    double v = instance.values[feature];
    switch (op) {
        case Op::Lt: return v < threshold;
        case Op::Le: return v <= threshold;
        case Op::Gt: return v > threshold;
        case Op::Ge: return v >= threshold;
        case Op::Eq:
        case Op::In: {
            int code = static_cast<int>(v);
            return std::find(categories.begin(), categories.end(), code) != categories.end();
        }
    }
    return false;
}

Region Region::full(const FeatureSchema& schema) {
    Region r;
    for (const auto& f : schema.features()) {
        r.kinds_.push_back(f.kind);
        Interval d;
        if (f.kind == FeatureKind::Numeric) d = {f.min, true, f.max, true};
        r.domain_.push_back(d);
        r.intervals_.push_back(d);
        r.allowed_.emplace_back(f.kind == FeatureKind::Categorical ? f.categories.size() : 0, true);
    }
    return r;
}

void Region::restrict(const Condition& c) {
    if (c.feature >= kinds_.size()) throw Error(ErrorCode::TypeError, "condition references unknown feature");
    const bool numeric = kinds_[c.feature] == FeatureKind::Numeric;
    if (numeric != numeric_op(c.op)) throw Error(ErrorCode::TypeError, "operator does not fit feature kind");
    auto& iv = intervals_[c.feature];
    switch (c.op) {
        case Op::Lt:
            if (c.threshold < iv.hi) {
                iv.hi = c.threshold;
                iv.hi_closed = false;
            } else if (c.threshold == iv.hi) {
                iv.hi_closed = false;
            }
            break;
        case Op::Le:
            if (c.threshold < iv.hi) {
                iv.hi = c.threshold;
                iv.hi_closed = true;
            }
            break;
        case Op::Gt:
            if (c.threshold > iv.lo) {
                iv.lo = c.threshold;
                iv.lo_closed = false;
            } else if (c.threshold == iv.lo) {
                iv.lo_closed = false;
            }
            break;
        case Op::Ge:
            if (c.threshold > iv.lo) {
                iv.lo = c.threshold;
                iv.lo_closed = true;
            }
            break;
        case Op::Eq:
        case Op::In: {
            auto& allowed = allowed_[c.feature];
            std::vector<bool> keep(allowed.size(), false);
            for (int k : c.categories) {
                if (k >= 0 && static_cast<std::size_t>(k) < keep.size()) keep[static_cast<std::size_t>(k)] = true;
            }
            for (std::size_t k = 0; k < allowed.size(); ++k) allowed[k] = allowed[k] && keep[k];
            break;
        }
    }
}

Region Region::intersect(const Region& other) const {
    Region out = *this;
    for (std::size_t f = 0; f < kinds_.size(); ++f) {
        auto& a = out.intervals_[f];
        const auto& b = other.intervals_[f];
        if (b.lo > a.lo) {
            a.lo = b.lo;
            a.lo_closed = b.lo_closed;
        } else if (b.lo == a.lo) {
            a.lo_closed = a.lo_closed && b.lo_closed;
        }
        if (b.hi < a.hi) {
            a.hi = b.hi;
            a.hi_closed = b.hi_closed;
        } else if (b.hi == a.hi) {
            a.hi_closed = a.hi_closed && b.hi_closed;
        }
        for (std::size_t k = 0; k < out.allowed_[f].size(); ++k) {
            out.allowed_[f][k] = out.allowed_[f][k] && other.allowed_[f][k];
        }
    }
    return out;
}

std::optional<std::size_t> Region::empty_feature() const {
    for (std::size_t f = 0; f < kinds_.size(); ++f) {
        if (kinds_[f] == FeatureKind::Numeric) {
            if (intervals_[f].empty()) return f;
        } else if (std::none_of(allowed_[f].begin(), allowed_[f].end(), [](bool b) { return b; })) {
            return f;
        }
    }
    return std::nullopt;
}

bool Region::empty() const { return empty_feature().has_value(); }

bool Region::contains(const TaskInstance& instance) const {
    for (std::size_t f = 0; f < kinds_.size(); ++f) {
        double v = instance.values[f];
        if (kinds_[f] == FeatureKind::Numeric) {
            const auto& iv = intervals_[f];
            if (v < iv.lo || (v == iv.lo && !iv.lo_closed)) return false;
            if (v > iv.hi || (v == iv.hi && !iv.hi_closed)) return false;
        } else {
            auto code = static_cast<std::size_t>(v);
            if (code >= allowed_[f].size() || !allowed_[f][code]) return false;
        }
    }
    return true;
}

std::vector<Condition> Region::to_conditions(const FeatureSchema& schema) const {
    std::vector<Condition> out;
    for (std::size_t f = 0; f < kinds_.size(); ++f) {
        if (kinds_[f] == FeatureKind::Numeric) {
            const auto& iv = intervals_[f];
            const auto& dom = domain_[f];
            if (iv.lo > dom.lo || (iv.lo == dom.lo && !iv.lo_closed)) {
                out.push_back({f, iv.lo_closed ? Op::Ge : Op::Gt, iv.lo, {}});
            }
            if (iv.hi < dom.hi || (iv.hi == dom.hi && !iv.hi_closed)) {
                out.push_back({f, iv.hi_closed ? Op::Le : Op::Lt, iv.hi, {}});
            }
        } else {
            std::vector<int> cats;
            for (std::size_t k = 0; k < allowed_[f].size(); ++k) {
                if (allowed_[f][k]) cats.push_back(static_cast<int>(k));
            }
            if (cats.size() == allowed_[f].size()) continue;
            out.push_back({f, cats.size() == 1 ? Op::Eq : Op::In, 0.0, cats});
        }
    }
    if (out.empty()) {
        // Vacuous rule: render as a full-domain bound on the first feature.
        const auto& f0 = schema.feature(0);
        if (f0.kind == FeatureKind::Numeric) {
            out.push_back({0, Op::Ge, f0.min, {}});
        } else {
            std::vector<int> cats(f0.categories.size());
            std::iota(cats.begin(), cats.end(), 0);
            out.push_back({0, Op::In, 0.0, cats});
        }
    }
    return out;
}

Region region_of(std::span<const Condition> conditions, const FeatureSchema& schema) {
    Region r = Region::full(schema);
    for (const auto& c : conditions) r.restrict(c);
    return r;
}

bool Rule::matches(const TaskInstance& instance) const {
    return std::all_of(conditions.begin(), conditions.end(),
                       [&](const Condition& c) { return c.matches(instance); });
}

void validate_rule(const Rule& rule, const FeatureSchema& schema) {
    if (rule.conditions.empty()) throw Error(ErrorCode::TypeError, "rule has no conditions");
    for (const auto& c : rule.conditions) {
        if (c.feature >= schema.size()) throw Error(ErrorCode::TypeError, "condition references unknown feature");
        const auto& f = schema.feature(c.feature);
        if (f.kind == FeatureKind::Numeric) {
            if (!numeric_op(c.op)) {
                throw Error(ErrorCode::TypeError, "operator " + std::string(to_string(c.op)) +
                                                      " is not valid for numeric feature " + f.name);
            }
            if (!std::isfinite(c.threshold)) {
                throw Error(ErrorCode::TypeError, "non-finite threshold on " + f.name);
            }
        } else {
            if (numeric_op(c.op)) {
                throw Error(ErrorCode::TypeError, "operator " + std::string(to_string(c.op)) +
                                                      " is not valid for categorical feature " + f.name);
            }
            if (c.categories.empty() || (c.op == Op::Eq && c.categories.size() != 1)) {
                throw Error(ErrorCode::TypeError, "bad category list on " + f.name);
            }
            for (int k : c.categories) {
                if (k < 0 || static_cast<std::size_t>(k) >= f.categories.size()) {
                    throw Error(ErrorCode::TypeError, "unknown category on " + f.name);
                }
            }
        }
    }
    auto region = region_of(rule.conditions, schema);
    if (auto f = region.empty_feature()) {
        throw Error(ErrorCode::Unsatisfiable,
                    "rule " + std::to_string(rule.id) + " can never match: conditions on " +
                        schema.feature(*f).name + " are contradictory or outside the feature domain");
    }
}

// ---------------------------------------------------------------------------
// Rule sets

std::optional<RulePrediction> RuleSet::predict(const TaskInstance& instance) const {
    for (const auto& r : rules) {
        if (r.matches(instance)) return RulePrediction{r.prediction, r.id};
    }
    return std::nullopt;
}

const Rule* RuleSet::find(int id) const {
    for (const auto& r : rules) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

RuleSet tree_to_rules(const DecisionTreeModel& tree, const FeatureSchema& schema) {
    if (tree.nodes.empty()) throw Error(ErrorCode::InvalidArgument, "empty decision tree");
    RuleSet out;
    std::function<void(int, Region)> walk = [&](int i, Region region) {
        const auto& n = tree.nodes.at(static_cast<std::size_t>(i));
        if (n.is_leaf()) {
            Rule r;
            r.id = static_cast<int>(out.rules.size()) + 1;
            r.priority = r.id;
            r.prediction = n.leaf_class;
            r.conditions = region.to_conditions(schema);
            out.rules.push_back(std::move(r));
            return;
        }
        auto f = static_cast<std::size_t>(n.feature);
        Region left = region, right = region;
        if (n.categorical) {
            std::vector<int> rest;
            for (std::size_t k = 0; k < schema.feature(f).categories.size(); ++k) {
                if (static_cast<int>(k) != n.category) rest.push_back(static_cast<int>(k));
            }
            left.restrict({f, Op::Eq, 0.0, {n.category}});
            right.restrict({f, Op::In, 0.0, rest});
        } else {
            left.restrict({f, Op::Le, n.threshold, {}});
            right.restrict({f, Op::Gt, n.threshold, {}});
        }
        walk(n.left, left);
        walk(n.right, right);
    };
    walk(0, Region::full(schema));
    return out;
}

namespace {

void renumber(std::vector<Rule>& rules) {
    for (std::size_t i = 0; i < rules.size(); ++i) rules[i].priority = static_cast<int>(i) + 1;
}

std::vector<Rule>::iterator find_rule(std::vector<Rule>& rules, int id) {
    auto it = std::find_if(rules.begin(), rules.end(), [id](const Rule& r) { return r.id == id; });
    if (it == rules.end()) throw Error(ErrorCode::NotFound, "unknown rule id " + std::to_string(id));
    return it;
}

}  // namespace

RuleSet apply_edit(const RuleSet& ruleset, const RuleEdit& edit, const FeatureSchema& schema) {
    RuleSet out = ruleset;
    auto& rules = out.rules;
    switch (edit.kind) {
        case RuleEdit::Kind::Add: {
            if (!edit.conditions || !edit.prediction) {
                throw Error(ErrorCode::InvalidArgument, "add needs conditions and a prediction");
            }
            int next_id = 1;
            for (const auto& r : rules) next_id = std::max(next_id, r.id + 1);
            Rule r;
            r.id = edit.rule_id.value_or(next_id);
            if (ruleset.find(r.id)) throw Error(ErrorCode::Duplicate, "rule id " + std::to_string(r.id) + " exists");
            r.conditions = *edit.conditions;
            r.prediction = *edit.prediction;
            validate_rule(r, schema);
            auto pos = static_cast<std::size_t>(
                std::clamp<int>(edit.priority.value_or(static_cast<int>(rules.size()) + 1), 1,
                                static_cast<int>(rules.size()) + 1) - 1);
            rules.insert(rules.begin() + static_cast<std::ptrdiff_t>(pos), std::move(r));
            break;
        }
        case RuleEdit::Kind::Delete: {
            if (!edit.rule_id) throw Error(ErrorCode::InvalidArgument, "delete needs a rule id");
            rules.erase(find_rule(rules, *edit.rule_id));
            break;
        }
        case RuleEdit::Kind::Modify: {
            if (!edit.rule_id) throw Error(ErrorCode::InvalidArgument, "modify needs a rule id");
            auto it = find_rule(rules, *edit.rule_id);
            Rule r = *it;
            if (edit.conditions) r.conditions = *edit.conditions;
            if (edit.prediction) r.prediction = *edit.prediction;
            validate_rule(r, schema);
            *it = std::move(r);
            if (edit.priority) {
                Rule moved = *it;
                rules.erase(it);
                auto pos = static_cast<std::size_t>(
                    std::clamp<int>(*edit.priority, 1, static_cast<int>(rules.size()) + 1) - 1);
                rules.insert(rules.begin() + static_cast<std::ptrdiff_t>(pos), std::move(moved));
            }
            break;
        }
        case RuleEdit::Kind::Reorder: {
            std::vector<int> have, want = edit.order;
            for (const auto& r : rules) have.push_back(r.id);
            std::sort(have.begin(), have.end());
            std::sort(want.begin(), want.end());
            if (have != want) throw Error(ErrorCode::InvalidArgument, "reorder must list every rule id exactly once");
            std::vector<Rule> reordered;
            for (int id : edit.order) reordered.push_back(*find_rule(rules, id));
            rules = std::move(reordered);
            break;
        }
    }
    renumber(rules);
    out.origin = RuleOrigin::Edited;
    out.history.push_back(edit);
    return out;
}

bool regions_overlap(const Rule& a, const Rule& b, const FeatureSchema& schema) {
    return !region_of(a.conditions, schema).intersect(region_of(b.conditions, schema)).empty();
}

ConflictReport check_rule(const Rule& rule, std::span<const DecisionRecord> records,
                          const RuleSet& ruleset, const FeatureSchema& schema) {
    ConflictReport report;
    for (const auto& rec : records) {
        if (rule.matches(rec.instance) && rec.human_decision != rule.prediction) {
            report.history_conflicts.push_back(rec.instance.id);
        }
    }
    for (const auto& other : ruleset.rules) {
        if (other.id == rule.id || other.prediction == rule.prediction) continue;
        if (regions_overlap(rule, other, schema)) report.rule_conflicts.push_back(other.id);
    }
    return report;
}

HumanPrediction predict_human(const HumanModel& model, const TaskInstance& instance) {
    if (auto hit = model.ruleset.predict(instance)) return {hit->label, hit->rule_id};
    return {model.fallback.predict(instance), std::nullopt};
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::size_t feature_index(const nlohmann::json& j, const FeatureSchema& schema) {
    auto name = j.get<std::string>();
    auto idx = schema.index_of(name);
    if (!idx) throw Error(ErrorCode::TypeError, "unknown feature: " + name);
    return *idx;
}

int category_code(const Feature& f, const nlohmann::json& j) {
    if (!j.is_string()) throw Error(ErrorCode::TypeError, "category value for " + f.name + " must be a string");
    auto code = f.category_code(j.get<std::string>());
    if (!code) throw Error(ErrorCode::TypeError, "unknown category " + j.get<std::string>() + " for " + f.name);
    return *code;
}

template <typename F>
auto guarded(F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("malformed document: ") + e.what());
    }
}

}  // namespace

nlohmann::json to_json(const Condition& c, const FeatureSchema& schema) {
    const auto& f = schema.feature(c.feature);
    nlohmann::json j{{"feature", f.name}, {"op", std::string(to_string(c.op))}};
    if (numeric_op(c.op)) {
        j["value"] = c.threshold;
    } else if (c.op == Op::Eq) {
        j["value"] = f.categories.at(static_cast<std::size_t>(c.categories.at(0)));
    } else {
        nlohmann::json v = nlohmann::json::array();
        for (int k : c.categories) v.push_back(f.categories.at(static_cast<std::size_t>(k)));
        j["value"] = v;
    }
    return j;
}

Condition condition_from_json(const nlohmann::json& j, const FeatureSchema& schema) {
    return guarded([&] {
        Condition c;
        c.feature = feature_index(j.at("feature"), schema);
        c.op = op_from_string(j.at("op").get<std::string>());
        const auto& f = schema.feature(c.feature);
        const auto& v = j.at("value");
        if (f.kind == FeatureKind::Numeric) {
            if (!numeric_op(c.op)) {
                throw Error(ErrorCode::TypeError, "operator " + std::string(to_string(c.op)) +
                                                      " is not valid for numeric feature " + f.name);
            }
            if (!v.is_number()) throw Error(ErrorCode::TypeError, "numeric condition on " + f.name + " needs a number");
            c.threshold = v.get<double>();
        } else {
            if (numeric_op(c.op)) {
                throw Error(ErrorCode::TypeError, "operator " + std::string(to_string(c.op)) +
                                                      " is not valid for categorical feature " + f.name);
            }
            if (v.is_array()) {
                for (const auto& e : v) c.categories.push_back(category_code(f, e));
            } else {
                c.categories.push_back(category_code(f, v));
            }
        }
        return c;
    });
}

nlohmann::json to_json(const Rule& r, const FeatureSchema& schema) {
    nlohmann::json conds = nlohmann::json::array();
    for (const auto& c : r.conditions) conds.push_back(to_json(c, schema));
    return {{"id", r.id},
            {"priority", r.priority},
            {"conditions", conds},
            {"prediction", std::string(to_string(r.prediction))}};
}

Rule rule_from_json(const nlohmann::json& j, const FeatureSchema& schema) {
    return guarded([&] {
        Rule r;
        r.id = j.value("id", 0);
        r.priority = j.value("priority", 0);
        for (const auto& c : j.at("conditions")) r.conditions.push_back(condition_from_json(c, schema));
        r.prediction = label_from_string(j.at("prediction").get<std::string>());
        return r;
    });
}

nlohmann::json to_json(const RuleEdit& e, const FeatureSchema& schema) {
    static const char* kinds[] = {"add", "delete", "modify", "reorder"};
    nlohmann::json j{{"kind", kinds[static_cast<int>(e.kind)]}};
    if (e.rule_id) j["rule_id"] = *e.rule_id;
    if (e.conditions) {
        nlohmann::json conds = nlohmann::json::array();
        for (const auto& c : *e.conditions) conds.push_back(to_json(c, schema));
        j["conditions"] = conds;
    }
    if (e.prediction) j["prediction"] = std::string(to_string(*e.prediction));
    if (e.priority) j["priority"] = *e.priority;
    if (e.kind == RuleEdit::Kind::Reorder) j["order"] = e.order;
    return j;
}

RuleEdit edit_from_json(const nlohmann::json& j, const FeatureSchema& schema) {
    return guarded([&] {
        RuleEdit e;
        auto kind = j.at("kind").get<std::string>();
        if (kind == "add") e.kind = RuleEdit::Kind::Add;
        else if (kind == "delete") e.kind = RuleEdit::Kind::Delete;
        else if (kind == "modify") e.kind = RuleEdit::Kind::Modify;
        else if (kind == "reorder") e.kind = RuleEdit::Kind::Reorder;
        else throw Error(ErrorCode::InvalidArgument, "unknown edit kind: " + kind);
        if (j.contains("rule_id")) e.rule_id = j.at("rule_id").get<int>();
        if (j.contains("conditions")) {
            std::vector<Condition> conds;
            for (const auto& c : j.at("conditions")) conds.push_back(condition_from_json(c, schema));
            e.conditions = std::move(conds);
        }
        if (j.contains("prediction")) e.prediction = label_from_string(j.at("prediction").get<std::string>());
        if (j.contains("priority")) e.priority = j.at("priority").get<int>();
        if (j.contains("order")) e.order = j.at("order").get<std::vector<int>>();
        return e;
    });
}

nlohmann::json to_json(const RuleSet& rs, const FeatureSchema& schema) {
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& r : rs.rules) rules.push_back(to_json(r, schema));
    nlohmann::json history = nlohmann::json::array();
    for (const auto& e : rs.history) history.push_back(to_json(e, schema));
    return {{"origin", rs.origin == RuleOrigin::Initialized ? "initialized" : "edited"},
            {"rules", rules},
            {"history", history}};
}

RuleSet ruleset_from_json(const nlohmann::json& j, const FeatureSchema& schema) {
    return guarded([&] {
        RuleSet rs;
        rs.origin = j.at("origin").get<std::string>() == "edited" ? RuleOrigin::Edited : RuleOrigin::Initialized;
        for (const auto& r : j.at("rules")) rs.rules.push_back(rule_from_json(r, schema));
        std::sort(rs.rules.begin(), rs.rules.end(),
                  [](const Rule& a, const Rule& b) { return a.priority < b.priority; });
        for (const auto& e : j.at("history")) rs.history.push_back(edit_from_json(e, schema));
        return rs;
    });
}

nlohmann::json to_json(const DecisionTreeModel& tree, const FeatureSchema& schema) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
        nlohmann::json j{{"class", std::string(to_string(n.leaf_class))}, {"counts", n.counts}};
        if (!n.is_leaf()) {
            const auto& f = schema.feature(static_cast<std::size_t>(n.feature));
            j["feature"] = f.name;
            if (n.categorical) {
                j["category"] = f.categories.at(static_cast<std::size_t>(n.category));
            } else {
                j["threshold"] = n.threshold;
            }
            j["left"] = n.left;
            j["right"] = n.right;
        }
        nodes.push_back(std::move(j));
    }
    return {{"nodes", nodes}};
}

DecisionTreeModel tree_from_json(const nlohmann::json& j, const FeatureSchema& schema) {
    return guarded([&] {
        DecisionTreeModel t;
        for (const auto& nj : j.at("nodes")) {
            TreeNode n;
            n.leaf_class = label_from_string(nj.at("class").get<std::string>());
            n.counts = nj.at("counts").get<std::array<std::size_t, 2>>();
            if (nj.contains("feature")) {
                auto f = feature_index(nj.at("feature"), schema);
                n.feature = static_cast<int>(f);
                if (nj.contains("category")) {
                    n.categorical = true;
                    n.category = category_code(schema.feature(f), nj.at("category"));
                } else {
                    n.threshold = nj.at("threshold").get<double>();
                }
                n.left = nj.at("left").get<int>();
                n.right = nj.at("right").get<int>();
            }
            t.nodes.push_back(n);
        }
        for (const auto& n : t.nodes) {
            if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 ||
                                 static_cast<std::size_t>(std::max(n.left, n.right)) >= t.nodes.size())) {
                throw Error(ErrorCode::Parse, "tree node references a missing child");
            }
        }
        return t;
    });
}

nlohmann::json to_json(const ConflictReport& r) {
    return {{"history_conflicts", r.history_conflicts},
            {"rule_conflicts", r.rule_conflicts},
            {"history_conflict_count", r.history_conflicts.size()},
            {"rule_conflict_count", r.rule_conflicts.size()}};
}

}  // namespace cltrust
