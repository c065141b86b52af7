#include "cltrust/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "cltrust/error.hpp"
#include "cltrust/hashing.hpp"

namespace cltrust {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back(trim(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.emplace_back(trim(current));
    return fields;
}

std::optional<double> parse_number(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<Label> parse_label(std::string_view raw) {
    std::string_view s = trim(raw);
    // adult.test writes labels with a trailing period
    if (!s.empty() && s.back() == '.') s.remove_suffix(1);
    if (s == "<=50K") return Label::AtMost50K;
    if (s == ">50K") return Label::Over50K;
    if (auto income = parse_number(s)) {
        return *income > 50000.0 ? Label::Over50K : Label::AtMost50K;
    }
    return std::nullopt;
}

}  // namespace

std::optional<int> Feature::category_code(std::string_view value) const {
    auto it = std::find(categories.begin(), categories.end(), value);
    if (it == categories.end()) return std::nullopt;
    return static_cast<int>(it - categories.begin());
}

bool Feature::in_domain(double value) const {
    if (kind == FeatureKind::Numeric) return value >= min && value <= max;
    double code = std::floor(value);
    return code == value && code >= 0 && code < static_cast<double>(categories.size());
}

FeatureSchema::FeatureSchema(std::vector<Feature> features) : features_(std::move(features)) {
    if (features_.empty()) throw Error(ErrorCode::InvalidArgument, "schema has no features");
    for (std::size_t i = 0; i < features_.size(); ++i) {
        const auto& f = features_[i];
        for (std::size_t j = 0; j < i; ++j) {
            if (features_[j].name == f.name) {
                throw Error(ErrorCode::InvalidArgument, "duplicate feature name: " + f.name);
            }
        }
        if (f.kind == FeatureKind::Categorical) {
            if (f.categories.empty()) {
                throw Error(ErrorCode::InvalidArgument, "empty category list for " + f.name);
            }
            auto sorted = f.categories;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
                throw Error(ErrorCode::InvalidArgument, "duplicate category in " + f.name);
            }
        } else if (!(f.min <= f.max)) {
            throw Error(ErrorCode::InvalidArgument, "empty numeric domain for " + f.name);
        }
    }
}

FeatureSchema FeatureSchema::adult_income() {
    std::vector<Feature> f;
    f.push_back({"age", FeatureKind::Numeric, 17, 90, {}});
    f.push_back({"education-num", FeatureKind::Numeric, 1, 16, {}});
    f.push_back({"occupation",
                 FeatureKind::Categorical,
                 0,
                 0,
                 {"Adm-clerical", "Armed-Forces", "Craft-repair", "Exec-managerial",
                  "Farming-fishing", "Handlers-cleaners", "Machine-op-inspct", "Other-service",
                  "Priv-house-serv", "Prof-specialty", "Protective-serv", "Sales",
                  "Tech-support", "Transport-moving"}});
    f.push_back({"marital-status",
                 FeatureKind::Categorical,
                 0,
                 0,
                 {"Divorced", "Married-AF-spouse", "Married-civ-spouse", "Married-spouse-absent",
                  "Never-married", "Separated", "Widowed"}});
    f.push_back({"hours-per-week", FeatureKind::Numeric, 1, 99, {}});
    return FeatureSchema(std::move(f));
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (features_[i].name == name) return i;
    }
    return std::nullopt;
}

std::size_t FeatureSchema::encoded_size() const {
    std::size_t n = 0;
    for (const auto& f : features_) {
        n += f.kind == FeatureKind::Numeric ? 1 : f.categories.size();
    }
    return n;
}

std::uint64_t FeatureSchema::hash() const {
    std::ostringstream os;
    for (const auto& f : features_) {
        os << f.name << '|' << (f.kind == FeatureKind::Numeric ? "num" : "cat") << '|';
        if (f.kind == FeatureKind::Numeric) {
            os << f.min << ',' << f.max;
        } else {
            for (const auto& c : f.categories) os << c << ',';
        }
        os << ';';
    }
    return fnv1a64(os.str());
}

std::string_view to_string(Label label) {
    return label == Label::Over50K ? ">50K" : "<=50K";
}

Label label_from_string(std::string_view text) {
    if (text == ">50K") return Label::Over50K;
    if (text == "<=50K") return Label::AtMost50K;
    throw Error(ErrorCode::Parse, "unknown label: " + std::string(text));
}

std::string render_value(const Feature& feature, double value) {
    if (feature.kind == FeatureKind::Categorical) {
        auto code = static_cast<std::size_t>(value);
        return code < feature.categories.size() ? feature.categories[code] : "?";
    }
    std::ostringstream os;
    os << value;
    return os.str();
}

LoadResult parse_dataset(std::istream& in, const FeatureSchema& schema,
                         const LoadOptions& options) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::Parse, "missing header row");
    auto header = split_csv_line(line);

    std::vector<std::size_t> columns(schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i) {
        auto it = std::find(header.begin(), header.end(), schema.feature(i).name);
        if (it == header.end()) {
            throw Error(ErrorCode::Parse, "header is missing column " + schema.feature(i).name);
        }
        columns[i] = static_cast<std::size_t>(it - header.begin());
    }
    std::optional<std::size_t> label_column;
    for (const auto& name : options.label_columns) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it != header.end()) {
            label_column = static_cast<std::size_t>(it - header.begin());
            break;
        }
    }
    if (!label_column) throw Error(ErrorCode::Parse, "header has no label column");

    LoadResult result;
    auto drop = [&result](const std::string& reason) {
        ++result.dropped;
        ++result.drop_reasons[reason];
    };
    auto is_missing = [&options](std::string_view v) {
        return std::find(options.missing_markers.begin(), options.missing_markers.end(), v) !=
               options.missing_markers.end();
    };

    std::int64_t row = -1;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            drop("column count");
            continue;
        }
        TaskInstance inst;
        inst.id = row;
        inst.values.resize(schema.size());
        bool ok = true;
        for (std::size_t i = 0; i < schema.size() && ok; ++i) {
            const auto& f = schema.feature(i);
            const std::string& raw = fields[columns[i]];
            if (is_missing(raw)) {
                drop("missing " + f.name);
                ok = false;
            } else if (f.kind == FeatureKind::Categorical) {
                auto code = f.category_code(raw);
                if (!code) {
                    drop("unknown category for " + f.name);
                    ok = false;
                } else {
                    inst.values[i] = *code;
                }
            } else {
                auto v = parse_number(raw);
                if (!v) {
                    drop("unparsable " + f.name);
                    ok = false;
                } else if (!f.in_domain(*v)) {
                    drop("out of domain " + f.name);
                    ok = false;
                } else {
                    inst.values[i] = *v;
                }
            }
        }
        if (!ok) continue;
        auto label = parse_label(fields[*label_column]);
        if (!label) {
            drop("bad label");
            continue;
        }
        inst.label = *label;
        result.instances.push_back(std::move(inst));
    }
    if (result.instances.empty()) throw Error(ErrorCode::Parse, "no valid rows");
    return result;
}

LoadResult load_dataset(const std::string& path, const FeatureSchema& schema,
                        const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
    return parse_dataset(in, schema, options);
}

EncodingStats compute_encoding_stats(const FeatureSchema& schema,
                                     std::span<const TaskInstance> train, bool normalize) {
    EncodingStats stats;
    stats.normalize = normalize;
    stats.means.assign(schema.size(), 0.0);
    stats.stds.assign(schema.size(), 0.0);
    if (train.empty()) return stats;
    const double n = static_cast<double>(train.size());
    for (std::size_t f = 0; f < schema.size(); ++f) {
        if (schema.feature(f).kind != FeatureKind::Numeric) continue;
        double sum = 0.0;
        for (const auto& t : train) sum += t.values[f];
        double mean = sum / n;
        double ss = 0.0;
        for (const auto& t : train) ss += (t.values[f] - mean) * (t.values[f] - mean);
        stats.means[f] = mean;
        stats.stds[f] = std::sqrt(ss / n);
    }
    return stats;
}

EncodedVector encode(const TaskInstance& instance, const FeatureSchema& schema,
                     const EncodingStats& stats) {
    // One-hot blocks scaled so a category mismatch adds exactly 1 to the
    // squared distance, the same as one standard deviation of a numeric.
    static const double kOneHot = 1.0 / std::sqrt(2.0);
    if (instance.values.size() != schema.size()) {
        throw Error(ErrorCode::InvalidArgument, "instance arity does not match schema");
    }
    EncodedVector out;
    out.reserve(schema.encoded_size());
    for (std::size_t f = 0; f < schema.size(); ++f) {
        const auto& feat = schema.feature(f);
        double v = instance.values[f];
        if (feat.kind == FeatureKind::Numeric) {
            if (!stats.normalize) {
                out.push_back(v);
            } else if (stats.stds[f] > 0.0) {
                out.push_back((v - stats.means[f]) / stats.stds[f]);
            } else {
                out.push_back(0.0);
            }
        } else {
            auto code = static_cast<std::size_t>(v);
            for (std::size_t c = 0; c < feat.categories.size(); ++c) {
                out.push_back(c == code ? kOneHot : 0.0);
            }
        }
    }
    return out;
}

EncodedVector encode(const TaskInstance& instance, const DatasetSplit& split) {
    return encode(instance, split.schema(), split.encoding_stats());
}

DatasetSplit::DatasetSplit(FeatureSchema schema, std::vector<TaskInstance> train,
                           std::vector<TaskInstance> test, bool normalize)
    : schema_(std::move(schema)), train_(std::move(train)), test_(std::move(test)) {
    stats_ = compute_encoding_stats(schema_, train_, normalize);
    build_index();
}

DatasetSplit::DatasetSplit(FeatureSchema schema, std::vector<TaskInstance> train,
                           std::vector<TaskInstance> test, EncodingStats stats)
    : schema_(std::move(schema)),
      train_(std::move(train)),
      test_(std::move(test)),
      stats_(std::move(stats)) {
    if (stats_.means.size() != schema_.size() || stats_.stds.size() != schema_.size()) {
        throw Error(ErrorCode::InvalidArgument, "encoding stats do not match schema");
    }
    build_index();
}

void DatasetSplit::build_index() {
    const std::size_t width = schema_.encoded_size();
    encoded_train_.clear();
    encoded_train_.reserve(train_.size() * width);
    for (const auto& t : train_) {
        auto v = encode(t, schema_, stats_);
        encoded_train_.insert(encoded_train_.end(), v.begin(), v.end());
    }
    by_id_.clear();
    for (std::size_t i = 0; i < train_.size(); ++i) by_id_[train_[i].id] = {true, i};
    for (std::size_t i = 0; i < test_.size(); ++i) by_id_[test_[i].id] = {false, i};
}

std::span<const double> DatasetSplit::encoded_train_row(std::size_t i) const {
    const std::size_t width = schema_.encoded_size();
    return std::span<const double>(encoded_train_).subspan(i * width, width);
}

const TaskInstance* DatasetSplit::find(std::int64_t id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return nullptr;
    return it->second.first ? &train_[it->second.second] : &test_[it->second.second];
}

DatasetSplit split(std::vector<TaskInstance> instances, const FeatureSchema& schema,
                   double train_fraction, std::uint64_t seed, bool normalize) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "train fraction must lie in (0, 1)");
    }
    const std::size_t n = instances.size();
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 instances to split");
    // Round half away from zero, keeping both sides non-empty.
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(instances[i], instances[pick(rng)]);
    }
    std::vector<TaskInstance> train(std::make_move_iterator(instances.begin()),
                                    std::make_move_iterator(instances.begin() + n_train));
    std::vector<TaskInstance> test(std::make_move_iterator(instances.begin() + n_train),
                                   std::make_move_iterator(instances.end()));
    return DatasetSplit(schema, std::move(train), std::move(test), normalize);
}

double euclidean(std::span<const double> a, std::span<const double> b) {
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        ss += d * d;
    }
    return std::sqrt(ss);
}

std::vector<Neighbor> nearest_neighbors(const TaskInstance& query, const DatasetSplit& split,
                                        std::size_t n, std::optional<std::int64_t> exclude_id) {
    const auto& train = split.train();
    if (train.empty()) throw Error(ErrorCode::InvalidArgument, "empty training split");
    auto q = encode(query, split);

    std::vector<Neighbor> all;
    all.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        double d = euclidean(q, split.encoded_train_row(i));
        if (exclude_id && train[i].id == *exclude_id && d == 0.0) continue;
        all.push_back({&train[i], d});
    }
    if (n > all.size()) {
        throw Error(ErrorCode::InvalidArgument, "requested " + std::to_string(n) +
                                                    " neighbors but only " +
                                                    std::to_string(all.size()) + " available");
    }
    auto before = [](const Neighbor& a, const Neighbor& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.instance->id < b.instance->id;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), before);
    all.resize(n);
    return all;
}

double median_pairwise_distance(const DatasetSplit& split, std::size_t sample_pairs,
                                std::uint64_t seed) {
    const std::size_t m = split.train().size();
    if (m < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 training instances");
    std::vector<double> d;
    if (m <= 200) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                d.push_back(euclidean(split.encoded_train_row(i), split.encoded_train_row(j)));
            }
        }
    } else {
        if (sample_pairs == 0) throw Error(ErrorCode::InvalidArgument, "sample_pairs must be > 0");
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, m - 1);
        d.reserve(sample_pairs);
        while (d.size() < sample_pairs) {
            std::size_t i = pick(rng), j = pick(rng);
            if (i == j) continue;
            d.push_back(euclidean(split.encoded_train_row(i), split.encoded_train_row(j)));
        }
    }
    std::sort(d.begin(), d.end());
    const std::size_t k = d.size();
    return k % 2 == 1 ? d[k / 2] : 0.5 * (d[k / 2 - 1] + d[k / 2]);
}

double permutation_importance(const Classifier& model, const DatasetSplit& split,
                              std::string_view feature, std::size_t repeats, std::uint64_t seed) {
    auto index = split.schema().index_of(feature);
    if (!index) throw Error(ErrorCode::InvalidArgument, "unknown feature: " + std::string(feature));
    if (repeats == 0) throw Error(ErrorCode::InvalidArgument, "repeats must be > 0");
    const auto& test = split.test();
    if (test.empty()) throw Error(ErrorCode::InvalidArgument, "empty test split");

    auto accuracy = [&](const std::vector<TaskInstance>& rows) {
        std::size_t hits = 0;
        for (const auto& r : rows) {
            if (model(encode(r, split)) == r.label) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(rows.size());
    };
    const double baseline = accuracy(test);

    std::mt19937_64 rng(seed);
    std::vector<double> column;
    column.reserve(test.size());
    for (const auto& t : test) column.push_back(t.values[*index]);

    double total = 0.0;
    std::vector<TaskInstance> shuffled = test;
    for (std::size_t r = 0; r < repeats; ++r) {
        std::shuffle(column.begin(), column.end(), rng);
        for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i].values[*index] = column[i];
        total += accuracy(shuffled);
    }
    return baseline - total / static_cast<double>(repeats);
}

}  // namespace cltrust
