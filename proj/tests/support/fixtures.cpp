#include "fixtures.hpp"

#include <algorithm>
#include <filesystem>
#include <mutex>

#include <unistd.h>

#include "cltrust/hashing.hpp"

namespace cltrust::testing {

const FeatureSchema& adult_schema() {
    static const FeatureSchema schema = FeatureSchema::adult_income();
    return schema;
}

TaskInstance make_instance(std::int64_t id, double age, double education, int occupation, int marital, double hours,
                           Label label) {
    return {id, {age, education, static_cast<double>(occupation), static_cast<double>(marital), hours}, label};
}

TaskInstance random_instance(Rng& rng, std::int64_t id, const FeatureSchema& schema) {
    TaskInstance t;
    t.id = id;
    for (const auto& f : schema.features()) {
        if (f.kind == FeatureKind::Numeric) {
            std::uniform_int_distribution<int> v(static_cast<int>(f.min), static_cast<int>(f.max));
            t.values.push_back(v(rng));
        } else {
            std::uniform_int_distribution<int> v(0, static_cast<int>(f.categories.size()) - 1);
            t.values.push_back(v(rng));
        }
    }
    t.label = std::bernoulli_distribution(0.5)(rng) ? Label::Over50K : Label::AtMost50K;
    return t;
}

std::vector<TaskInstance> random_instances(Rng& rng, std::size_t n, std::int64_t first_id) {
    std::vector<TaskInstance> out;
    std::bernoulli_distribution noise(0.15);
    for (std::size_t i = 0; i < n; ++i) {
        auto t = random_instance(rng, first_id + static_cast<std::int64_t>(i));
        const bool married = t.values[kMarital] == 2.0;
        const bool rich = married && (t.values[kEducation] >= 10 || t.values[kAge] >= 45);
        t.label = rich != noise(rng) ? Label::Over50K : Label::AtMost50K;
        out.push_back(std::move(t));
    }
    return out;
}

DatasetSplit random_split(std::uint64_t seed, std::size_t n_train, std::size_t n_test) {
    Rng rng(seed);
    auto train = random_instances(rng, n_train, 1);
    auto test = random_instances(rng, n_test, static_cast<std::int64_t>(n_train) + 1);
    return DatasetSplit(adult_schema(), std::move(train), std::move(test));
}

namespace {

int grow(Rng& rng, DecisionTreeModel& tree, const FeatureSchema& schema, std::size_t depth, std::size_t max_depth) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const bool split = depth < max_depth && (depth == 0 || std::bernoulli_distribution(0.7)(rng));
    const Label cls = std::bernoulli_distribution(0.5)(rng) ? Label::Over50K : Label::AtMost50K;
    if (!split) {
        auto& leaf = tree.nodes[static_cast<std::size_t>(index)];
        leaf.leaf_class = cls;
        leaf.counts[static_cast<std::size_t>(cls)] = 1 + rng() % 5;
        return index;
    }
    std::uniform_int_distribution<std::size_t> pick_feature(0, schema.size() - 1);
    const std::size_t f = pick_feature(rng);
    TreeNode node;
    node.feature = static_cast<int>(f);
    node.leaf_class = cls;
    const auto& feat = schema.feature(f);
    if (feat.kind == FeatureKind::Numeric) {
        std::uniform_int_distribution<int> v(static_cast<int>(feat.min), static_cast<int>(feat.max) - 1);
        node.threshold = v(rng) + 0.5;
    } else {
        node.categorical = true;
        std::uniform_int_distribution<int> c(0, static_cast<int>(feat.categories.size()) - 1);
        node.category = c(rng);
    }
    node.left = grow(rng, tree, schema, depth + 1, max_depth);
    node.right = grow(rng, tree, schema, depth + 1, max_depth);
    const auto& l = tree.nodes[static_cast<std::size_t>(node.left)].counts;
    const auto& r = tree.nodes[static_cast<std::size_t>(node.right)].counts;
    node.counts = {l[0] + r[0], l[1] + r[1]};
    tree.nodes[static_cast<std::size_t>(index)] = node;
    return index;
}

}  // namespace

DecisionTreeModel random_tree(Rng& rng, std::size_t max_depth, const FeatureSchema& schema) {
    DecisionTreeModel tree;
    grow(rng, tree, schema, 0, max_depth);
    return tree;
}

std::vector<DecisionRecord> records_from(const std::vector<TaskInstance>& instances,
                                         const std::function<Label(const TaskInstance&)>& decide) {
    std::vector<DecisionRecord> out;
    std::int64_t ts = 1000;
    for (const auto& t : instances) out.push_back({t, decide(t), ts++});
    return out;
}

TrialLog random_log(Rng& rng, StrategyKind condition, std::int64_t case_id, const std::string& participant) {
    auto label = [&rng] { return std::bernoulli_distribution(0.5)(rng) ? Label::Over50K : Label::AtMost50K; };
    TrialLog log;
    log.participant = participant;
    log.case_id = case_id;
    log.condition = condition;
    log.truth = label();
    log.final_decision = label();
    if (condition != StrategyKind::HumanOnly) {
        log.ai_label = label();
        log.ai_confidence = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
        if (rng() % 7 == 0) log.ai_confidence = 0.7;
        log.ai_correct = *log.ai_label == log.truth;
    }
    if (rng() % 2 == 0) log.human_pre_decision = label();
    if (needs_cl_estimate(condition)) {
        ClEstimate e;
        e.human_cl = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        e.ai_cl = log.ai_confidence.value_or(0.5);
        if (rng() % 9 == 0) e.human_cl = e.ai_cl;
        e.higher = compare_cl(e.human_cl, e.ai_cl);
        log.cl_estimate = e;
    }
    switch (rng() % 4) {
        case 0: log.perceived_higher = Perceived::Human; break;
        case 1: log.perceived_higher = Perceived::Ai; break;
        case 2: log.perceived_higher = Perceived::Both; break;
        default: break;
    }
    log.timing = {{"served", 10}, {"final", 20}};
    return log;
}

std::vector<TrialLog> random_logs(Rng& rng, std::size_t n, StrategyKind condition) {
    std::vector<TrialLog> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(random_log(rng, condition, static_cast<std::int64_t>(i + 1), "p" + std::to_string(i % 5)));
    }
    return out;
}

std::string data_file() { return CLTRUST_TEST_DATA; }

std::string cli_path() {
#ifdef CLTRUST_CLI_PATH
    return CLTRUST_CLI_PATH;
#else
    return "";
#endif
}

std::string temp_dir(const std::string& tag) {
    static std::mutex mutex;
    static int counter = 0;
    std::lock_guard lock(mutex);
    auto dir = std::filesystem::temp_directory_path() /
               ("cltrust_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

const SmallWorld& small_world() {
    static const SmallWorld w = [] {
        auto s = random_split(31, 300, 60);
        TrainConfig tc;
        tc.iterations = 300;
        auto model = train(s, tc);
        TaskCaseSet cases;
        cases.batches.resize(2);
        // The 8 least and 8 most confident test cases, spread over both batches.
        std::vector<SelectedCase> ranked;
        for (const auto& t : s.test()) {
            auto ai = predict(model, t, s);
            ranked.push_back({t, ai, ai.label == t.label});
        }
        std::stable_sort(ranked.begin(), ranked.end(), [](const SelectedCase& a, const SelectedCase& b) {
            return a.ai.confidence < b.ai.confidence;
        });
        // Low cases get a near-chance confidence so both CL routes occur.
        for (std::size_t i = 0; i < 8; ++i) {
            auto low = ranked[i];
            low.ai = prediction_from_probability(low.ai.label == Label::Over50K ? 0.52 : 0.48);
            cases.batches[i % 2].push_back(low);
            cases.batches[i % 2].push_back(ranked[ranked.size() - 1 - i]);
        }
        return SmallWorld{std::move(s), std::move(model), std::move(cases)};
    }();
    return w;
}

const DatasetSplit& real_split() {
    static const DatasetSplit s = [] {
        auto loaded = load_dataset(data_file(), adult_schema());
        return split(std::move(loaded.instances), adult_schema(), 0.7, 42);
    }();
    return s;
}

const LinearClassifier& real_model() {
    static const LinearClassifier m = train(real_split());
    return m;
}

}  // namespace cltrust::testing
