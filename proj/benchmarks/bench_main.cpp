#include <benchmark/benchmark.h>

#include "cltrust/ai_model.hpp"
#include "cltrust/cl_engine.hpp"
#include "cltrust/dataset.hpp"
#include "cltrust/human_model.hpp"

using namespace cltrust;

namespace {

const DatasetSplit& real_split() {
    static const DatasetSplit s = [] {
        const auto& schema = FeatureSchema::adult_income();
        auto loaded = load_dataset(CLTRUST_BENCH_DATA, schema);
        return split(std::move(loaded.instances), schema, 0.7, 42);
    }();
    return s;
}

const LinearClassifier& real_model() {
    static const LinearClassifier m = train(real_split());
    return m;
}

std::vector<DecisionRecord> human_records(std::size_t n) {
    std::vector<DecisionRecord> records;
    const auto& train_rows = real_split().train();
    for (std::size_t i = 0; i < n && i < train_rows.size(); ++i) {
        const auto& t = train_rows[i];
        records.push_back({t, t.values[0] > 40 ? Label::Over50K : Label::AtMost50K, 0});
    }
    return records;
}

HumanModel human_model() {
    auto tree = fit_tree(human_records(10), real_split().schema(), {3, 2});
    return {tree_to_rules(tree, real_split().schema()), tree};
}

void BM_NearestNeighbors(benchmark::State& state) {
    const auto& s = real_split();
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& q = s.test()[i++ % s.test().size()];
        benchmark::DoNotOptimize(nearest_neighbors(q, s, static_cast<std::size_t>(state.range(0))));
    }
}
BENCHMARK(BM_NearestNeighbors)->Arg(1)->Arg(10)->Arg(50);

void BM_EstimateHumanCl(benchmark::State& state) {
    const auto& s = real_split();
    const auto model = human_model();
    ClConfig cfg;
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& q = s.test()[i++ % s.test().size()];
        benchmark::DoNotOptimize(estimate_human_cl(model, q, s, cfg));
    }
}
BENCHMARK(BM_EstimateHumanCl);

void BM_FitTree(benchmark::State& state) {
    const auto records = human_records(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(fit_tree(records, real_split().schema(), {3, 2}));
}
BENCHMARK(BM_FitTree)->Arg(10)->Arg(1000);

void BM_Train(benchmark::State& state) {
    TrainConfig cfg;
    cfg.iterations = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(train(real_split(), cfg));
}
BENCHMARK(BM_Train)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_SelectTaskCases(benchmark::State& state) {
    const auto& model = real_model();
    SelectionConfig cfg;
    std::uint64_t seed = 42;
    for (auto _ : state) benchmark::DoNotOptimize(select_task_cases(model, real_split(), cfg, seed++));
}
BENCHMARK(BM_SelectTaskCases)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
