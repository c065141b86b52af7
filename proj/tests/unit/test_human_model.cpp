#include <gtest/gtest.h>

#include "cltrust/error.hpp"
#include "cltrust/human_model.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cltrust;
using namespace cltrust::testing;

namespace {

Condition num(std::size_t f, Op op, double v) { return {f, op, v, {}}; }
Condition cat(std::size_t f, std::vector<int> codes) {
    return {f, codes.size() == 1 ? Op::Eq : Op::In, 0.0, std::move(codes)};
}

Rule rule(int id, std::vector<Condition> cs, Label l) { return {id, std::move(cs), l, id}; }

RuleEdit edit(RuleEdit::Kind kind, std::optional<int> id = std::nullopt) {
    RuleEdit e;
    e.kind = kind;
    e.rule_id = id;
    return e;
}

RuleEdit add_edit(std::vector<Condition> cs, Label l, std::optional<int> position) {
    RuleEdit e = edit(RuleEdit::Kind::Add);
    e.conditions = std::move(cs);
    e.prediction = l;
    e.priority = position;
    return e;
}

RuleEdit modify_edit(int id, std::optional<std::vector<Condition>> cs, std::optional<Label> l) {
    RuleEdit e = edit(RuleEdit::Kind::Modify, id);
    e.conditions = std::move(cs);
    e.prediction = l;
    return e;
}

double gini(std::size_t pos, std::size_t n) {
    if (n == 0) return 0.0;
    const double p = static_cast<double>(pos) / n;
    return 1.0 - p * p - (1 - p) * (1 - p);
}

}  // namespace

TEST(FitTree, SingleClassGivesSingleLeaf) {
    Rng rng(1);
    auto records = records_from(random_instances(rng, 20), [](const TaskInstance&) { return Label::Over50K; });
    auto tree = fit_tree(records, adult_schema());
    ASSERT_EQ(tree.nodes.size(), 1u);
    EXPECT_TRUE(tree.nodes[0].is_leaf());
    EXPECT_EQ(tree.nodes[0].leaf_class, Label::Over50K);
    EXPECT_EQ(tree.nodes[0].counts[1], 20u);
}

TEST(FitTree, AgeSplitMatchesEnumeratedCandidates) {
    std::vector<TaskInstance> xs{make_instance(1, 30, 10, 0, 0, 40), make_instance(2, 35, 10, 0, 0, 40),
                                 make_instance(3, 45, 10, 0, 0, 40), make_instance(4, 50, 10, 0, 0, 40)};
    auto records = records_from(xs, [](const TaskInstance& t) {
        return t.values[kAge] >= 40 ? Label::Over50K : Label::AtMost50K;
    });
    // Candidate age thresholds 32.5, 40, 47.5; weighted child impurity of each.
    const double thresholds[] = {32.5, 40.0, 47.5};
    double best_t = 0, best_imp = 1e9;
    for (double t : thresholds) {
        std::size_t ln = 0, lp = 0, rn = 0, rp = 0;
        for (const auto& r : records) {
            bool pos = r.human_decision == Label::Over50K;
            if (r.instance.values[kAge] <= t) {
                ++ln;
                lp += pos;
            } else {
                ++rn;
                rp += pos;
            }
        }
        double imp = (ln * gini(lp, ln) + rn * gini(rp, rn)) / 4.0;
        if (imp < best_imp) {
            best_imp = imp;
            best_t = t;
        }
    }
    auto tree = fit_tree(records, adult_schema());
    ASSERT_EQ(tree.nodes.size(), 3u);
    EXPECT_EQ(tree.nodes[0].feature, static_cast<int>(kAge));
    EXPECT_EQ(tree.nodes[0].threshold, best_t);
    EXPECT_EQ(tree.depth(), 1u);
    for (const auto& r : records) EXPECT_EQ(tree.predict(r.instance), r.human_decision);
}

TEST(FitTree, DeterministicAndRespectsConfig) {
    Rng rng(2);
    auto xs = random_instances(rng, 60);
    auto records = records_from(xs, [](const TaskInstance& t) {
        return (t.values[kHours] > 45) != (t.values[kOccupation] == 3) ? Label::Over50K : Label::AtMost50K;
    });
    auto a = fit_tree(records, adult_schema(), {3, 2});
    auto b = fit_tree(records, adult_schema(), {3, 2});
    EXPECT_EQ(to_json(a, adult_schema()), to_json(b, adult_schema()));
    EXPECT_LE(a.depth(), 3u);
    for (const auto& n : a.nodes) {
        if (n.is_leaf()) {
            EXPECT_GE(n.counts[0] + n.counts[1], 2u);
        }
    }
    auto full = fit_tree(records, adult_schema());
    for (const auto& r : records) EXPECT_EQ(full.predict(r.instance), r.human_decision);
    EXPECT_THROW(fit_tree(std::vector<DecisionRecord>{}, adult_schema()), Error);
}

TEST(TreeToRules, SingleLeafIsVacuousRule) {
    DecisionTreeModel leaf;
    leaf.nodes.push_back(TreeNode{});
    leaf.nodes[0].leaf_class = Label::Over50K;
    leaf.nodes[0].counts = {0, 3};
    auto rs = tree_to_rules(leaf, adult_schema());
    ASSERT_EQ(rs.rules.size(), 1u);
    ASSERT_EQ(rs.rules[0].conditions.size(), 1u);
    EXPECT_EQ(rs.rules[0].conditions[0], num(kAge, Op::Ge, 17));
    EXPECT_EQ(rs.rules[0].prediction, Label::Over50K);
}

TEST(TreeToRules, DepthTwoHandConversion) {
    // age <= 40 ? (occupation == 3 ? A : B) : (hours <= 45.5 ? C : D)
    DecisionTreeModel t;
    t.nodes.resize(7);
    t.nodes[0] = {static_cast<int>(kAge), false, 40.0, -1, 1, 4, Label::AtMost50K, {2, 2}};
    t.nodes[1] = {static_cast<int>(kOccupation), true, 0.0, 3, 2, 3, Label::AtMost50K, {1, 1}};
    t.nodes[2] = {-1, false, 0.0, -1, -1, -1, Label::Over50K, {0, 1}};
    t.nodes[3] = {-1, false, 0.0, -1, -1, -1, Label::AtMost50K, {1, 0}};
    t.nodes[4] = {static_cast<int>(kHours), false, 45.5, -1, 5, 6, Label::AtMost50K, {1, 1}};
    t.nodes[5] = {-1, false, 0.0, -1, -1, -1, Label::AtMost50K, {1, 0}};
    t.nodes[6] = {-1, false, 0.0, -1, -1, -1, Label::Over50K, {0, 1}};
    auto rs = tree_to_rules(t, adult_schema());
    ASSERT_EQ(rs.rules.size(), 4u);
    std::vector<int> others;
    for (int k = 0; k < 14; ++k) {
        if (k != 3) others.push_back(k);
    }
    EXPECT_EQ(rs.rules[0].conditions, (std::vector<Condition>{num(kAge, Op::Le, 40), cat(kOccupation, {3})}));
    EXPECT_EQ(rs.rules[1].conditions, (std::vector<Condition>{num(kAge, Op::Le, 40), cat(kOccupation, others)}));
    EXPECT_EQ(rs.rules[2].conditions, (std::vector<Condition>{num(kAge, Op::Gt, 40), num(kHours, Op::Le, 45.5)}));
    EXPECT_EQ(rs.rules[3].conditions, (std::vector<Condition>{num(kAge, Op::Gt, 40), num(kHours, Op::Gt, 45.5)}));
    const Label want[] = {Label::Over50K, Label::AtMost50K, Label::AtMost50K, Label::Over50K};
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(rs.rules[i].prediction, want[i]);
        EXPECT_EQ(rs.rules[i].priority, i + 1);
    }
}

TEST(TreeToRules, MergesRepeatedBoundsOnOneFeature) {
    // age <= 60 then age > 30 on the left: one interval, two conditions.
    DecisionTreeModel t;
    t.nodes.resize(5);
    t.nodes[0] = {static_cast<int>(kAge), false, 60.0, -1, 1, 4, Label::AtMost50K, {2, 2}};
    t.nodes[1] = {static_cast<int>(kAge), false, 30.0, -1, 2, 3, Label::AtMost50K, {1, 1}};
    t.nodes[2] = {-1, false, 0.0, -1, -1, -1, Label::AtMost50K, {1, 0}};
    t.nodes[3] = {-1, false, 0.0, -1, -1, -1, Label::Over50K, {0, 1}};
    t.nodes[4] = {-1, false, 0.0, -1, -1, -1, Label::AtMost50K, {1, 0}};
    auto rs = tree_to_rules(t, adult_schema());
    ASSERT_EQ(rs.rules.size(), 3u);
    EXPECT_EQ(rs.rules[0].conditions, std::vector<Condition>{num(kAge, Op::Le, 30)});
    EXPECT_EQ(rs.rules[1].conditions, (std::vector<Condition>{num(kAge, Op::Gt, 30), num(kAge, Op::Le, 60)}));
}

TEST(TreeToRules, RandomTreesAgreeWithTreeWalk) {
    Rng rng(3);
    for (int k = 0; k < 60; ++k) {
        auto tree = random_tree(rng, 1 + k % 4);
        auto rs = tree_to_rules(tree, adult_schema());
        EXPECT_EQ(rs.rules.size(), tree.leaf_count());
        for (int i = 0; i < 300; ++i) {
            auto x = random_instance(rng, i);
            auto p = rs.predict(x);
            ASSERT_TRUE(p.has_value());
            EXPECT_EQ(p->label, oracle::tree_predict(tree, x));
            EXPECT_EQ(tree.predict(x), oracle::tree_predict(tree, x));
        }
    }
}

TEST(ApplyEdit, DeleteThenReAddRestoresPredictions) {
    Rng rng(4);
    auto tree = random_tree(rng, 3);
    auto rs = tree_to_rules(tree, adult_schema());
    const Rule victim = rs.rules[1];
    auto deleted = apply_edit(rs, edit(RuleEdit::Kind::Delete, victim.id), adult_schema());
    EXPECT_EQ(deleted.rules.size(), rs.rules.size() - 1);
    RuleEdit add = add_edit(victim.conditions, victim.prediction, victim.priority);
    auto back = apply_edit(deleted, add, adult_schema());
    EXPECT_EQ(back.origin, RuleOrigin::Edited);
    EXPECT_EQ(back.history.size(), 2u);
    EXPECT_EQ(rs.history.size(), 0u);
    EXPECT_EQ(rs.origin, RuleOrigin::Initialized);
    for (int i = 0; i < 1000; ++i) {
        auto x = random_instance(rng, i);
        EXPECT_EQ(back.predict(x)->label, rs.predict(x)->label);
    }
}

TEST(ApplyEdit, TopPriorityRuleWins) {
    DecisionTreeModel leaf;
    leaf.nodes.push_back(TreeNode{});
    leaf.nodes[0].leaf_class = Label::Over50K;
    leaf.nodes[0].counts = {0, 1};
    auto rs = tree_to_rules(leaf, adult_schema());
    RuleEdit add = add_edit({num(kAge, Op::Lt, 18)}, Label::AtMost50K, 1);
    auto edited = apply_edit(rs, add, adult_schema());
    ASSERT_EQ(edited.rules.size(), 2u);
    EXPECT_EQ(edited.rules[0].priority, 1);
    EXPECT_EQ(edited.rules[1].priority, 2);
    EXPECT_EQ(edited.predict(make_instance(1, 17, 10, 0, 0, 40))->label, Label::AtMost50K);
    EXPECT_EQ(edited.predict(make_instance(1, 18, 10, 0, 0, 40))->label, Label::Over50K);
}

TEST(ApplyEdit, Errors) {
    Rng rng(5);
    auto rs = tree_to_rules(random_tree(rng, 2), adult_schema());
    const int id = rs.rules[0].id;
    RuleEdit bad = modify_edit(id, std::vector<Condition>{num(kOccupation, Op::Lt, 5)}, std::nullopt);
    try {
        apply_edit(rs, bad, adult_schema());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TypeError);
    }
    RuleEdit empty =
        modify_edit(id, std::vector<Condition>{num(kAge, Op::Gt, 50), num(kAge, Op::Lt, 40)}, std::nullopt);
    try {
        apply_edit(rs, empty, adult_schema());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Unsatisfiable);
        EXPECT_NE(std::string(e.what()).find("age"), std::string::npos);
    }
    try {
        apply_edit(rs, edit(RuleEdit::Kind::Delete, 999), adult_schema());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFound);
    }
    RuleEdit reorder = edit(RuleEdit::Kind::Reorder);
    reorder.order = {rs.rules[0].id};
    if (rs.rules.size() > 1) {
        EXPECT_THROW(apply_edit(rs, reorder, adult_schema()), Error);
    }
}

TEST(ApplyEdit, ReorderAndModify) {
    auto rs = RuleSet{};
    rs.rules = {rule(1, {num(kAge, Op::Ge, 50)}, Label::Over50K), rule(2, {num(kAge, Op::Ge, 60)}, Label::AtMost50K)};
    RuleEdit reorder = edit(RuleEdit::Kind::Reorder);
    reorder.order = {2, 1};
    auto r = apply_edit(rs, reorder, adult_schema());
    EXPECT_EQ(r.rules[0].id, 2);
    EXPECT_EQ(r.rules[0].priority, 1);
    EXPECT_EQ(r.predict(make_instance(1, 65, 10, 0, 0, 40))->label, Label::AtMost50K);
    EXPECT_EQ(rs.predict(make_instance(1, 65, 10, 0, 0, 40))->label, Label::Over50K);
    RuleEdit modify = modify_edit(1, std::nullopt, Label::AtMost50K);
    auto m = apply_edit(rs, modify, adult_schema());
    EXPECT_EQ(m.find(1)->prediction, Label::AtMost50K);
    EXPECT_EQ(m.find(1)->conditions, rs.find(1)->conditions);
}

TEST(ApplyEdit, EditLocality) {
    Rng rng(6);
    for (int k = 0; k < 30; ++k) {
        auto rs = tree_to_rules(random_tree(rng, 3), adult_schema());
        std::uniform_real_distribution<double> age(20, 80);
        const double lo = age(rng);
        Rule added{0, {num(kAge, Op::Ge, lo), cat(kMarital, {static_cast<int>(rng() % 7)})}, Label::Over50K, 0};
        RuleEdit add = add_edit(added.conditions, added.prediction,
                                static_cast<int>(1 + rng() % (rs.rules.size() + 1)));
        auto edited = apply_edit(rs, add, adult_schema());
        for (int i = 0; i < 300; ++i) {
            auto x = random_instance(rng, i);
            if (!added.matches(x)) {
                EXPECT_EQ(edited.predict(x)->label, rs.predict(x)->label);
            }
        }
    }
}

TEST(CheckRule, HandExamples) {
    RuleSet rs;
    rs.rules = {rule(1, {num(kAge, Op::Ge, 50)}, Label::Over50K)};
    auto conflict = check_rule(rule(2, {num(kAge, Op::Ge, 60)}, Label::AtMost50K), {}, rs, adult_schema());
    EXPECT_EQ(conflict.rule_conflicts, std::vector<int>{1});
    EXPECT_TRUE(conflict.history_conflicts.empty());

    RuleSet young;
    young.rules = {rule(1, {num(kAge, Op::Lt, 30)}, Label::AtMost50K)};
    EXPECT_TRUE(check_rule(rule(2, {num(kAge, Op::Ge, 30)}, Label::Over50K), {}, young, adult_schema()).empty());

    std::vector<DecisionRecord> records{{make_instance(7, 65, 10, 0, 0, 40), Label::Over50K, 1},
                                        {make_instance(8, 61, 10, 0, 0, 40), Label::AtMost50K, 2},
                                        {make_instance(9, 20, 10, 0, 0, 40), Label::Over50K, 3}};
    auto h = check_rule(rule(2, {num(kAge, Op::Ge, 60)}, Label::AtMost50K), records, RuleSet{}, adult_schema());
    EXPECT_EQ(h.history_conflicts, std::vector<std::int64_t>{7});
    auto none = check_rule(rule(2, {num(kAge, Op::Ge, 89)}, Label::AtMost50K), records, RuleSet{}, adult_schema());
    EXPECT_TRUE(none.history_conflicts.empty());
}

TEST(CheckRule, OverlapMatchesGridSearchOnSmallSchema) {
    FeatureSchema small({{"a", FeatureKind::Numeric, 0, 4, {}},
                         {"b", FeatureKind::Numeric, 0, 4, {}},
                         {"c", FeatureKind::Categorical, 0, 0, {"x", "y", "z"}}});
    Rng rng(7);
    const Op numeric_ops[] = {Op::Lt, Op::Le, Op::Gt, Op::Ge};
    auto random_rule = [&](int id) {
        Rule r{id, {}, rng() % 2 ? Label::Over50K : Label::AtMost50K, id};
        const int n = 1 + static_cast<int>(rng() % 3);
        for (int i = 0; i < n; ++i) {
            if (rng() % 3 == 0) {
                std::vector<int> codes;
                for (int k = 0; k < 3; ++k) {
                    if (rng() % 2) codes.push_back(k);
                }
                if (codes.empty()) codes.push_back(static_cast<int>(rng() % 3));
                r.conditions.push_back(cat(2, codes));
            } else {
                r.conditions.push_back(num(rng() % 2, numeric_ops[rng() % 4], static_cast<double>(rng() % 5)));
            }
        }
        return r;
    };
    for (int k = 0; k < 2000; ++k) {
        Rule a = random_rule(1), b = random_rule(2);
        bool grid = false;
        for (int i = 0; i <= 8 && !grid; ++i) {
            for (int j = 0; j <= 8 && !grid; ++j) {
                for (int c = 0; c < 3 && !grid; ++c) {
                    TaskInstance x{0, {i * 0.5, j * 0.5, static_cast<double>(c)}, Label::AtMost50K};
                    grid = a.matches(x) && b.matches(x);
                }
            }
        }
        EXPECT_EQ(regions_overlap(a, b, small), grid);
    }
}

TEST(PredictHuman, PriorityAndFallback) {
    HumanModel m;
    m.ruleset.rules = {rule(1, {num(kAge, Op::Ge, 50)}, Label::Over50K),
                       rule(2, {num(kHours, Op::Ge, 60)}, Label::AtMost50K),
                       rule(3, {num(kAge, Op::Ge, 40)}, Label::AtMost50K)};
    m.fallback.nodes.push_back(TreeNode{});
    m.fallback.nodes[0].leaf_class = Label::Over50K;
    m.fallback.nodes[0].counts = {0, 1};
    auto p = predict_human(m, make_instance(1, 55, 10, 0, 0, 40));
    EXPECT_EQ(p.label, Label::Over50K);
    EXPECT_EQ(p.rule_id, 1);
    auto f = predict_human(m, make_instance(2, 20, 10, 0, 0, 40));
    EXPECT_EQ(f.label, Label::Over50K);
    EXPECT_FALSE(f.rule_id.has_value());
}

TEST(PredictHuman, UneditedModelEqualsTree) {
    Rng rng(8);
    auto xs = random_instances(rng, 40);
    auto records = records_from(xs, [](const TaskInstance& t) {
        return t.values[kEducation] > 12 ? Label::Over50K : Label::AtMost50K;
    });
    auto tree = fit_tree(records, adult_schema());
    HumanModel m{tree_to_rules(tree, adult_schema()), tree};
    for (int i = 0; i < 1000; ++i) {
        auto x = random_instance(rng, i);
        EXPECT_EQ(predict_human(m, x).label, oracle::tree_predict(tree, x));
    }
}

TEST(Json, RoundTrips) {
    Rng rng(9);
    auto tree = random_tree(rng, 3);
    const auto& s = adult_schema();
    EXPECT_EQ(to_json(tree_from_json(to_json(tree, s), s), s), to_json(tree, s));
    auto rs = tree_to_rules(tree, s);
    RuleEdit add = add_edit({cat(kOccupation, {1, 4})}, Label::Over50K, 1);
    rs = apply_edit(rs, add, s);
    auto j = to_json(rs, s);
    EXPECT_EQ(j["origin"], "edited");
    EXPECT_EQ(j["rules"][0]["conditions"][0]["feature"], "occupation");
    EXPECT_EQ(j["rules"][0]["conditions"][0]["op"], "in");
    EXPECT_EQ(to_json(ruleset_from_json(j, s), s), j);
    EXPECT_EQ(edit_from_json(to_json(add, s), s), add);
    auto r = rule_from_json(nlohmann::json{{"id", 5},
                                           {"priority", 1},
                                           {"prediction", ">50K"},
                                           {"conditions", {{{"feature", "age"}, {"op", ">="}, {"value", 50}}}}},
                            s);
    EXPECT_EQ(r.conditions[0], num(kAge, Op::Ge, 50));
    EXPECT_THROW(rule_from_json(nlohmann::json{{"id", 5},
                                               {"prediction", ">50K"},
                                               {"conditions", {{{"feature", "wage"}, {"op", ">="}, {"value", 1}}}}},
                                s),
                 Error);
}
