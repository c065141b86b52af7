#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cltrust {

enum class FeatureKind { Numeric, Categorical };

struct Feature {
    std::string name;
    FeatureKind kind = FeatureKind::Numeric;
    // Numeric domain, inclusive.
    double min = 0.0;
    double max = 0.0;
    // Categorical domain, in code order.
    std::vector<std::string> categories;

    std::optional<int> category_code(std::string_view value) const;
    bool in_domain(double value) const;
};

class FeatureSchema {
public:
    FeatureSchema() = default;
    explicit FeatureSchema(std::vector<Feature> features);

    // age, education-num, occupation, marital-status, hours-per-week
    static FeatureSchema adult_income();

    const std::vector<Feature>& features() const { return features_; }
    const Feature& feature(std::size_t i) const { return features_.at(i); }
    std::size_t size() const { return features_.size(); }
    std::optional<std::size_t> index_of(std::string_view name) const;

    // Number of components an encoded vector has under this schema.
    std::size_t encoded_size() const;
    // FNV-1a over a canonical rendering of names, kinds and domains.
    std::uint64_t hash() const;

    bool operator==(const FeatureSchema&) const = default;

private:
    std::vector<Feature> features_;
};

enum class Label : std::uint8_t { AtMost50K = 0, Over50K = 1 };

std::string_view to_string(Label label);
Label label_from_string(std::string_view text);
inline Label flip(Label l) { return l == Label::Over50K ? Label::AtMost50K : Label::Over50K; }

// One income-prediction case. Categorical values are stored as category codes.
struct TaskInstance {
    std::int64_t id = 0;
    std::vector<double> values;
    Label label = Label::AtMost50K;

    bool operator==(const TaskInstance&) const = default;
};

using EncodedVector = std::vector<double>;

struct LoadResult {
    std::vector<TaskInstance> instances;
    std::size_t dropped = 0;
    std::map<std::string, std::size_t> drop_reasons;
};

struct LoadOptions {
    // Tried in order; the first present header column is used as the label.
    std::vector<std::string> label_columns{"income", "income-per-year"};
    std::vector<std::string> missing_markers{"?", ""};
};

LoadResult load_dataset(const std::string& path, const FeatureSchema& schema,
                        const LoadOptions& options = {});
LoadResult parse_dataset(std::istream& in, const FeatureSchema& schema,
                         const LoadOptions& options = {});

struct EncodingStats {
    // Indexed by schema feature; entries for categorical features are unused.
    std::vector<double> means;
    std::vector<double> stds;
    bool normalize = true;

    bool operator==(const EncodingStats&) const = default;
};

class DatasetSplit {
public:
    DatasetSplit(FeatureSchema schema, std::vector<TaskInstance> train,
                 std::vector<TaskInstance> test, bool normalize = true);
    DatasetSplit(FeatureSchema schema, std::vector<TaskInstance> train,
                 std::vector<TaskInstance> test, EncodingStats stats);

    const FeatureSchema& schema() const { return schema_; }
    const std::vector<TaskInstance>& train() const { return train_; }
    const std::vector<TaskInstance>& test() const { return test_; }
    const EncodingStats& encoding_stats() const { return stats_; }

    // Encoded training rows, row-major, encoded_size() wide.
    std::span<const double> encoded_train_row(std::size_t i) const;
    const TaskInstance* find(std::int64_t id) const;

private:
    void build_index();

    FeatureSchema schema_;
    std::vector<TaskInstance> train_;
    std::vector<TaskInstance> test_;
    EncodingStats stats_;
    std::vector<double> encoded_train_;
    std::map<std::int64_t, std::pair<bool, std::size_t>> by_id_;
};

DatasetSplit split(std::vector<TaskInstance> instances, const FeatureSchema& schema,
                   double train_fraction, std::uint64_t seed, bool normalize = true);

EncodingStats compute_encoding_stats(const FeatureSchema& schema,
                                     std::span<const TaskInstance> train, bool normalize);

EncodedVector encode(const TaskInstance& instance, const FeatureSchema& schema,
                     const EncodingStats& stats);
EncodedVector encode(const TaskInstance& instance, const DatasetSplit& split);

double euclidean(std::span<const double> a, std::span<const double> b);

struct Neighbor {
    const TaskInstance* instance = nullptr;
    double distance = 0.0;
};

// Ascending by distance, ties by ascending id. `exclude_id` drops a training
// instance that is the query itself (same id at distance zero).
std::vector<Neighbor> nearest_neighbors(const TaskInstance& query, const DatasetSplit& split,
                                        std::size_t n,
                                        std::optional<std::int64_t> exclude_id = std::nullopt);

double median_pairwise_distance(const DatasetSplit& split, std::size_t sample_pairs,
                                std::uint64_t seed);

using Classifier = std::function<Label(std::span<const double>)>;

// Baseline test accuracy minus mean accuracy over `repeats` shuffles of one
// feature column of the test split.
double permutation_importance(const Classifier& model, const DatasetSplit& split,
                              std::string_view feature, std::size_t repeats, std::uint64_t seed);

std::string render_value(const Feature& feature, double value);

}  // namespace cltrust
