#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cltrust/dataset.hpp"
#include "cltrust/human_model.hpp"
#include "cltrust/metrics.hpp"

// Brute-force re-derivations used as test oracles. None of these call into the
// library's encoding, neighbor search or CL code.
namespace cltrust::oracle {

struct Stats {
    std::vector<double> mean;
    std::vector<double> sd;
};

Stats population_stats(const FeatureSchema& schema, const std::vector<TaskInstance>& train);

// Squared distance: standardized numeric differences plus one per category mismatch.
double distance(const FeatureSchema& schema, const Stats& stats, const TaskInstance& a, const TaskInstance& b);

struct Ranked {
    const TaskInstance* instance;
    double distance;
};

std::vector<Ranked> neighbors(const FeatureSchema& schema, const std::vector<TaskInstance>& train,
                              const TaskInstance& query, std::size_t n);

// Direct evaluation of the correctness-likelihood sum.
double correctness_likelihood(const std::vector<double>& distances, const std::vector<bool>& correct, double alpha);

double human_cl(const FeatureSchema& schema, const std::vector<TaskInstance>& train, const TaskInstance& query,
                const std::function<Label(const TaskInstance&)>& human, std::size_t n, double alpha);

// Tree walk written without the library's traversal.
Label tree_predict(const DecisionTreeModel& tree, const TaskInstance& t);

struct Recount {
    double agreement = 0.0;
    double team = 0.0;
    std::optional<double> agree_correct;
    std::optional<double> agree_wrong;
    std::size_t cells[4]{};
    std::size_t cell_correct[4]{};
};

Recount recount(const std::vector<TrialLog>& logs, double threshold);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace cltrust::oracle
