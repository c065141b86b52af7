#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cltrust/ai_model.hpp"
#include "cltrust/cl_engine.hpp"
#include "cltrust/dataset.hpp"
#include "cltrust/human_model.hpp"
#include "cltrust/metrics.hpp"

namespace cltrust::testing {

using Rng = std::mt19937_64;

const FeatureSchema& adult_schema();

// Feature indices of the canonical schema.
inline constexpr std::size_t kAge = 0;
inline constexpr std::size_t kEducation = 1;
inline constexpr std::size_t kOccupation = 2;
inline constexpr std::size_t kMarital = 3;
inline constexpr std::size_t kHours = 4;

TaskInstance make_instance(std::int64_t id, double age, double education, int occupation, int marital, double hours,
                           Label label = Label::AtMost50K);
TaskInstance random_instance(Rng& rng, std::int64_t id, const FeatureSchema& schema = adult_schema());

// Labels follow a noisy income-like rule so trained models are informative.
std::vector<TaskInstance> random_instances(Rng& rng, std::size_t n, std::int64_t first_id = 1);
DatasetSplit random_split(std::uint64_t seed, std::size_t n_train, std::size_t n_test);

// A random valid tree over the schema, grown independently of the CART code.
DecisionTreeModel random_tree(Rng& rng, std::size_t max_depth, const FeatureSchema& schema = adult_schema());

std::vector<DecisionRecord> records_from(const std::vector<TaskInstance>& instances,
                                         const std::function<Label(const TaskInstance&)>& decide);

TrialLog random_log(Rng& rng, StrategyKind condition, std::int64_t case_id, const std::string& participant);
std::vector<TrialLog> random_logs(Rng& rng, std::size_t n, StrategyKind condition);

// A small synthetic world for protocol tests: two batches of `per_batch` test
// cases with the model's predictions attached.
struct SmallWorld {
    DatasetSplit split;
    LinearClassifier model;
    TaskCaseSet cases;
};
const SmallWorld& small_world();

// The real dataset with the fixed 70/30 split (seed 42); loaded once.
const DatasetSplit& real_split();
const LinearClassifier& real_model();

std::string data_file();
std::string cli_path();
std::string temp_dir(const std::string& tag);

}  // namespace cltrust::testing
