#include "cltrust/ai_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "cltrust/error.hpp"
#include "cltrust/hashing.hpp"

namespace cltrust {

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

// -log sigmoid(z) computed without overflow.
double softplus_neg(double z) {
    return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

double objective(const std::vector<double>& w, double b, std::span<const EncodedVector> x,
                 std::span<const Label> y, double l2) {
    double loss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double z = b;
        for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * x[i][j];
        loss += y[i] == Label::Over50K ? softplus_neg(z) : softplus_neg(-z);
    }
    double reg = 0.0;
    for (double wj : w) reg += wj * wj;
    return loss / static_cast<double>(x.size()) + 0.5 * l2 * reg;
}

}  // namespace

double LinearClassifier::logit(std::span<const double> x) const {
    if (x.size() != weights.size()) {
        throw Error(ErrorCode::InvalidArgument,
                    "encoded vector has " + std::to_string(x.size()) + " components, model expects " +
                        std::to_string(weights.size()));
    }
    double z = bias;
    for (std::size_t j = 0; j < x.size(); ++j) z += weights[j] * x[j];
    return z;
}

Label LinearClassifier::predict_label(std::span<const double> x) const {
    return sigmoid(logit(x)) >= 0.5 ? Label::Over50K : Label::AtMost50K;
}

AiPrediction prediction_from_probability(double p) {
    AiPrediction out;
    out.probability_positive = p;
    out.label = p >= 0.5 ? Label::Over50K : Label::AtMost50K;
    out.confidence = std::max(p, 1.0 - p);
    return out;
}

LinearClassifier train(std::span<const EncodedVector> x, std::span<const Label> y,
                       const TrainConfig& config) {
    if (x.empty() || x.size() != y.size()) {
        throw Error(ErrorCode::InvalidArgument, "training data is empty or mislabeled");
    }
    const bool has_pos = std::find(y.begin(), y.end(), Label::Over50K) != y.end();
    const bool has_neg = std::find(y.begin(), y.end(), Label::AtMost50K) != y.end();
    if (!has_pos || !has_neg) {
        throw Error(ErrorCode::InvalidArgument, "training data contains a single class");
    }
    const std::size_t n = x.size();
    const std::size_t d = x.front().size();
    const double inv_n = 1.0 / static_cast<double>(n);

    LinearClassifier model;
    model.weights.assign(d, 0.0);
    std::vector<double> grad(d);
    const std::size_t every = std::max<std::size_t>(1, config.checkpoint_every);

    for (std::size_t it = 0; it < config.iterations; ++it) {
        if (it % every == 0) {
            model.loss_checkpoints.push_back(objective(model.weights, model.bias, x, y, config.l2));
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& xi = x[i];
            double z = model.bias;
            for (std::size_t j = 0; j < d; ++j) z += model.weights[j] * xi[j];
            double r = sigmoid(z) - (y[i] == Label::Over50K ? 1.0 : 0.0);
            for (std::size_t j = 0; j < d; ++j) grad[j] += r * xi[j];
            grad_b += r;
        }
        for (std::size_t j = 0; j < d; ++j) {
            model.weights[j] -= config.learning_rate * (grad[j] * inv_n + config.l2 * model.weights[j]);
        }
        model.bias -= config.learning_rate * grad_b * inv_n;
    }
    model.iterations = config.iterations;
    model.final_loss = objective(model.weights, model.bias, x, y, config.l2);
    model.loss_checkpoints.push_back(model.final_loss);
    return model;
}

LinearClassifier train(const DatasetSplit& split, const TrainConfig& config) {
    std::vector<EncodedVector> x;
    std::vector<Label> y;
    x.reserve(split.train().size());
    for (std::size_t i = 0; i < split.train().size(); ++i) {
        auto row = split.encoded_train_row(i);
        x.emplace_back(row.begin(), row.end());
        y.push_back(split.train()[i].label);
    }
    return train(x, y, config);
}

AiPrediction predict(const LinearClassifier& model, std::span<const double> encoded) {
    return prediction_from_probability(sigmoid(model.logit(encoded)));
}

AiPrediction predict(const LinearClassifier& model, const TaskInstance& instance,
                     const DatasetSplit& split) {
    return predict(model, encode(instance, split));
}

CalibrationReport calibration_report(std::span<const ScoredOutcome> outcomes, double bin_width) {
    if (outcomes.empty()) throw Error(ErrorCode::InvalidArgument, "no instances to calibrate");
    if (!(bin_width > 0.0 && bin_width <= 0.5)) {
        throw Error(ErrorCode::InvalidArgument, "bin width must lie in (0, 0.5]");
    }
    const auto nbins = static_cast<std::size_t>(std::ceil(0.5 / bin_width - 1e-9));
    CalibrationReport report;
    report.bins.resize(nbins);
    std::vector<double> conf_sum(nbins, 0.0);
    std::vector<std::size_t> hits(nbins, 0);
    for (std::size_t b = 0; b < nbins; ++b) {
        report.bins[b].lower = 0.5 + static_cast<double>(b) * bin_width;
        report.bins[b].upper = std::min(1.0, 0.5 + static_cast<double>(b + 1) * bin_width);
    }
    for (const auto& o : outcomes) {
        auto b = static_cast<std::size_t>(std::max(0.0, std::floor((o.confidence - 0.5) / bin_width + 1e-12)));
        b = std::min(b, nbins - 1);
        ++report.bins[b].count;
        conf_sum[b] += o.confidence;
        if (o.correct) ++hits[b];
    }
    report.total = outcomes.size();
    for (std::size_t b = 0; b < nbins; ++b) {
        auto& bin = report.bins[b];
        if (bin.count == 0) continue;
        bin.mean_confidence = conf_sum[b] / static_cast<double>(bin.count);
        bin.accuracy = static_cast<double>(hits[b]) / static_cast<double>(bin.count);
        report.expected_calibration_error += static_cast<double>(bin.count) /
                                             static_cast<double>(report.total) *
                                             std::abs(bin.mean_confidence - bin.accuracy);
    }
    return report;
}

CalibrationReport calibration_report(const LinearClassifier& model, const DatasetSplit& split,
                                     std::span<const TaskInstance> instances, double bin_width) {
    std::vector<ScoredOutcome> outcomes;
    outcomes.reserve(instances.size());
    for (const auto& t : instances) {
        auto p = predict(model, t, split);
        outcomes.push_back({p.confidence, p.label == t.label});
    }
    return calibration_report(outcomes, bin_width);
}

Explanation explain(const LinearClassifier& model, const TaskInstance& instance,
                    const DatasetSplit& split) {
    auto x = encode(instance, split);
    if (x.size() != model.weights.size()) {
        throw Error(ErrorCode::InvalidArgument, "model does not match the split encoding");
    }
    Explanation out;
    out.base = model.bias;
    std::size_t offset = 0;
    for (const auto& f : split.schema().features()) {
        std::size_t width = f.kind == FeatureKind::Numeric ? 1 : f.categories.size();
        double c = 0.0;
        for (std::size_t j = offset; j < offset + width; ++j) c += model.weights[j] * x[j];
        out.contributions.push_back({f.name, c});
        offset += width;
    }
    return out;
}

std::vector<SelectedCase> TaskCaseSet::all() const {
    std::vector<SelectedCase> out;
    for (const auto& b : batches) out.insert(out.end(), b.begin(), b.end());
    return out;
}

namespace {

enum class Level { Low = 0, High = 1 };

struct Slot {
    std::size_t batch;
    Level level;
    bool correct;
    Label label;
    std::size_t member;  // index into the pool
};

// pool cell key: (level, correct, label)
std::size_t cell_of(Level level, bool correct, Label label) {
    return static_cast<std::size_t>(level) * 4 + (correct ? 2 : 0) + static_cast<std::size_t>(label);
}

std::string cell_name(std::size_t cell) {
    std::string s = (cell / 4) == 0 ? "low-confidence" : "high-confidence";
    s += (cell & 2) ? " AI-correct" : " AI-wrong";
    s += (cell & 1) ? " label >50K" : " label <=50K";
    return s;
}

std::vector<FeatureCoverage> compute_coverage(std::span<const CandidateCase> pool,
                                              const std::vector<SelectedCase>& chosen,
                                              const FeatureSchema& schema, double share) {
    std::vector<FeatureCoverage> out;
    for (std::size_t f = 0; f < schema.size(); ++f) {
        const auto& feat = schema.feature(f);
        FeatureCoverage cov{feat.name, 0, 0};
        if (feat.kind == FeatureKind::Categorical) {
            std::vector<std::size_t> counts(feat.categories.size(), 0);
            for (const auto& c : pool) ++counts[static_cast<std::size_t>(c.instance.values[f])];
            std::vector<bool> seen(feat.categories.size(), false);
            for (const auto& c : chosen) seen[static_cast<std::size_t>(c.instance.values[f])] = true;
            for (std::size_t k = 0; k < counts.size(); ++k) {
                if (static_cast<double>(counts[k]) >= share * static_cast<double>(pool.size())) {
                    ++cov.common_values;
                    if (seen[k]) ++cov.covered;
                }
            }
        } else {
            // Common values of a numeric feature: its pool quintiles.
            std::vector<double> v;
            v.reserve(pool.size());
            for (const auto& c : pool) v.push_back(c.instance.values[f]);
            std::sort(v.begin(), v.end());
            std::array<double, 4> cuts{};
            for (std::size_t q = 0; q < 4; ++q) cuts[q] = v[(q + 1) * v.size() / 5];
            std::array<bool, 5> hit{};
            for (const auto& c : chosen) {
                double x = c.instance.values[f];
                std::size_t q = 0;
                while (q < 4 && x >= cuts[q]) ++q;
                hit[q] = true;
            }
            cov.common_values = 5;
            cov.covered = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), true));
        }
        out.push_back(cov);
    }
    return out;
}

}  // namespace

TaskCaseSet select_task_cases(std::span<const CandidateCase> pool, const FeatureSchema& schema,
                              const SelectionConfig& cfg, std::uint64_t seed) {
    const std::size_t per_batch_correct = cfg.low_correct_per_batch + cfg.high_correct_per_batch;
    const std::size_t per_batch_wrong =
        (cfg.low_per_batch - cfg.low_correct_per_batch) + (cfg.high_per_batch - cfg.high_correct_per_batch);
    const std::size_t total_correct = cfg.batches * per_batch_correct;
    const std::size_t total_wrong = cfg.batches * per_batch_wrong;
    if (cfg.low_correct_per_batch > cfg.low_per_batch || cfg.high_correct_per_batch > cfg.high_per_batch ||
        cfg.batches == 0) {
        throw Error(ErrorCode::InvalidArgument, "selection config is inconsistent");
    }
    if ((total_correct + total_wrong) % 2 != 0 || total_wrong % 2 != 0) {
        throw Error(ErrorCode::Infeasible,
                    "infeasible: label balance with equal false positives and false negatives needs "
                    "even totals");
    }
    const std::size_t wrong_pos = total_wrong / 2;
    const std::size_t total_pos = (total_correct + total_wrong) / 2;
    const std::size_t correct_pos = total_pos - wrong_pos;

    std::array<std::vector<std::size_t>, 8> cells;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto& c = pool[i];
        Level lv = c.ai.confidence >= cfg.confidence_threshold ? Level::High : Level::Low;
        cells[cell_of(lv, c.ai_correct(), c.instance.label)].push_back(i);
    }

    auto need = [&](Level lv, bool correct) {
        std::size_t per = lv == Level::Low
                              ? (correct ? cfg.low_correct_per_batch : cfg.low_per_batch - cfg.low_correct_per_batch)
                              : (correct ? cfg.high_correct_per_batch : cfg.high_per_batch - cfg.high_correct_per_batch);
        return per * cfg.batches;
    };
    for (Level lv : {Level::Low, Level::High}) {
        for (bool correct : {true, false}) {
            std::size_t have = cells[cell_of(lv, correct, Label::AtMost50K)].size() +
                               cells[cell_of(lv, correct, Label::Over50K)].size();
            if (have < need(lv, correct)) {
                throw Error(ErrorCode::Infeasible,
                            std::string("infeasible: ") + (lv == Level::Low ? "low" : "high") +
                                "-confidence AI-" + (correct ? "correct" : "wrong") + " pool has " +
                                std::to_string(have) + " cases, " + std::to_string(need(lv, correct)) +
                                " required");
            }
        }
    }
    auto positives_available = [&](bool correct) {
        return cells[cell_of(Level::Low, correct, Label::Over50K)].size() +
               cells[cell_of(Level::High, correct, Label::Over50K)].size();
    };
    auto negatives_available = [&](bool correct) {
        return cells[cell_of(Level::Low, correct, Label::AtMost50K)].size() +
               cells[cell_of(Level::High, correct, Label::AtMost50K)].size();
    };
    if (positives_available(true) < correct_pos || negatives_available(true) < total_correct - correct_pos) {
        throw Error(ErrorCode::Infeasible, "infeasible: label balance among AI-correct cases");
    }
    if (positives_available(false) < wrong_pos || negatives_available(false) < total_wrong - wrong_pos) {
        throw Error(ErrorCode::Infeasible,
                    "infeasible: equal false positives and false negatives among AI-wrong cases");
    }

    std::mt19937_64 rng(seed);
    std::map<std::string, std::size_t> failures;

    for (std::size_t restart = 0; restart < cfg.max_restarts; ++restart) {
        std::vector<Slot> slots;
        for (std::size_t b = 0; b < cfg.batches; ++b) {
            auto add = [&](Level lv, bool correct, std::size_t count) {
                for (std::size_t k = 0; k < count; ++k) slots.push_back({b, lv, correct, Label::AtMost50K, 0});
            };
            add(Level::Low, true, cfg.low_correct_per_batch);
            add(Level::Low, false, cfg.low_per_batch - cfg.low_correct_per_batch);
            add(Level::High, true, cfg.high_correct_per_batch);
            add(Level::High, false, cfg.high_per_batch - cfg.high_correct_per_batch);
        }
        // Random label pattern meeting the balance constraints by construction.
        for (bool correct : {true, false}) {
            std::vector<Slot*> group;
            for (auto& s : slots) {
                if (s.correct == correct) group.push_back(&s);
            }
            std::shuffle(group.begin(), group.end(), rng);
            std::size_t pos = correct ? correct_pos : wrong_pos;
            for (std::size_t k = 0; k < pos; ++k) group[k]->label = Label::Over50K;
        }

        std::array<std::size_t, 8> demand{};
        for (const auto& s : slots) ++demand[cell_of(s.level, s.correct, s.label)];
        bool short_cell = false;
        for (std::size_t c = 0; c < 8; ++c) {
            if (demand[c] > cells[c].size()) {
                ++failures["pool too small for " + cell_name(c)];
                short_cell = true;
            }
        }
        if (short_cell) continue;

        std::vector<bool> used(pool.size(), false);
        std::array<std::vector<std::size_t>, 8> order = cells;
        std::array<std::size_t, 8> next{};
        for (auto& o : order) std::shuffle(o.begin(), o.end(), rng);
        for (auto& s : slots) {
            auto c = cell_of(s.level, s.correct, s.label);
            s.member = order[c][next[c]++];
            used[s.member] = true;
        }

        bool all_ok = true;
        for (std::size_t b = 0; b < cfg.batches && all_ok; ++b) {
            for (Level lv : {Level::Low, Level::High}) {
                const double target = lv == Level::Low ? cfg.low_mean : cfg.high_mean;
                std::vector<Slot*> bucket;
                for (auto& s : slots) {
                    if (s.batch == b && s.level == lv) bucket.push_back(&s);
                }
                double sum = 0.0;
                for (auto* s : bucket) sum += pool[s->member].ai.confidence;
                const double k = static_cast<double>(bucket.size());
                std::uniform_int_distribution<std::size_t> pick_slot(0, bucket.size() - 1);
                for (std::size_t step = 0; step < cfg.swaps_per_restart; ++step) {
                    if (std::abs(sum / k - target) <= cfg.mean_tolerance) break;
                    Slot* s = bucket[pick_slot(rng)];
                    const auto& cell = cells[cell_of(s->level, s->correct, s->label)];
                    std::uniform_int_distribution<std::size_t> pick_member(0, cell.size() - 1);
                    std::size_t cand = cell[pick_member(rng)];
                    if (used[cand]) continue;
                    double new_sum = sum - pool[s->member].ai.confidence + pool[cand].ai.confidence;
                    if (std::abs(new_sum / k - target) < std::abs(sum / k - target)) {
                        used[s->member] = false;
                        used[cand] = true;
                        s->member = cand;
                        sum = new_sum;
                    }
                }
                if (std::abs(sum / k - target) > cfg.mean_tolerance) {
                    ++failures[std::string(lv == Level::Low ? "low" : "high") +
                               "-confidence mean within tolerance"];
                    all_ok = false;
                    break;
                }
            }
        }
        if (!all_ok) continue;

        TaskCaseSet out;
        out.restarts_used = restart;
        out.batches.resize(cfg.batches);
        for (const auto& s : slots) {
            const auto& c = pool[s.member];
            out.batches[s.batch].push_back({c.instance, c.ai, c.ai_correct()});
        }
        for (auto& b : out.batches) {
            std::sort(b.begin(), b.end(),
                      [](const SelectedCase& a, const SelectedCase& c) { return a.instance.id < c.instance.id; });
        }
        out.coverage = compute_coverage(pool, out.all(), schema, cfg.common_value_share);
        return out;
    }

    std::string worst = "unknown";
    std::size_t worst_n = 0;
    for (const auto& [name, n] : failures) {
        if (n > worst_n) {
            worst = name;
            worst_n = n;
        }
    }
    throw Error(ErrorCode::Infeasible, "infeasible after " + std::to_string(cfg.max_restarts) +
                                           " restarts; unmet constraint: " + worst);
}

TaskCaseSet select_task_cases(const LinearClassifier& model, const DatasetSplit& split,
                              const SelectionConfig& config, std::uint64_t seed) {
    std::vector<CandidateCase> pool;
    pool.reserve(split.test().size());
    for (const auto& t : split.test()) pool.push_back({t, predict(model, t, split)});
    return select_task_cases(pool, split.schema(), config, seed);
}

std::vector<std::string> check_task_case_set(const TaskCaseSet& set, const SelectionConfig& cfg) {
    std::vector<std::string> problems;
    if (set.batches.size() != cfg.batches) problems.push_back("batch count");
    std::size_t pos = 0, fp = 0, fn = 0, correct = 0, total = 0;
    for (std::size_t b = 0; b < set.batches.size(); ++b) {
        const auto& batch = set.batches[b];
        std::size_t low = 0, low_ok = 0, high = 0, high_ok = 0;
        double low_sum = 0.0, high_sum = 0.0;
        for (const auto& c : batch) {
            bool ok = c.ai.label == c.instance.label;
            if (ok != c.ai_correct) problems.push_back("correctness flag mismatch");
            if (c.ai.confidence >= cfg.confidence_threshold) {
                ++high;
                high_ok += ok;
                high_sum += c.ai.confidence;
            } else {
                ++low;
                low_ok += ok;
                low_sum += c.ai.confidence;
            }
            pos += c.instance.label == Label::Over50K;
            fp += !ok && c.ai.label == Label::Over50K;
            fn += !ok && c.ai.label == Label::AtMost50K;
            correct += ok;
            ++total;
        }
        std::string tag = "batch " + std::to_string(b + 1) + ": ";
        if (low != cfg.low_per_batch) problems.push_back(tag + "low-confidence count");
        if (high != cfg.high_per_batch) problems.push_back(tag + "high-confidence count");
        if (low_ok != cfg.low_correct_per_batch) problems.push_back(tag + "low-confidence correct count");
        if (high_ok != cfg.high_correct_per_batch) problems.push_back(tag + "high-confidence correct count");
        if (low > 0 && std::abs(low_sum / static_cast<double>(low) - cfg.low_mean) > cfg.mean_tolerance) {
            problems.push_back(tag + "low-confidence mean");
        }
        if (high > 0 && std::abs(high_sum / static_cast<double>(high) - cfg.high_mean) > cfg.mean_tolerance) {
            problems.push_back(tag + "high-confidence mean");
        }
    }
    if (2 * pos != total) problems.push_back("label balance");
    if (fp != fn) problems.push_back("false positives != false negatives");
    const std::size_t expected_correct =
        cfg.batches * (cfg.low_correct_per_batch + cfg.high_correct_per_batch);
    if (correct != expected_correct) problems.push_back("overall AI accuracy");
    std::vector<std::int64_t> ids;
    for (const auto& b : set.batches) {
        for (const auto& c : b) ids.push_back(c.instance.id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) problems.push_back("duplicate case");
    return problems;
}

nlohmann::json instance_to_json(const TaskInstance& t, const FeatureSchema& schema) {
    nlohmann::json features = nlohmann::json::object();
    for (std::size_t f = 0; f < schema.size(); ++f) {
        const auto& feat = schema.feature(f);
        if (feat.kind == FeatureKind::Numeric) {
            features[feat.name] = t.values[f];
        } else {
            features[feat.name] = render_value(feat, t.values[f]);
        }
    }
    return {{"id", t.id}, {"features", features}, {"label", std::string(to_string(t.label))}};
}

TaskInstance instance_from_json(const nlohmann::json& j, const FeatureSchema& schema) {
    TaskInstance t;
    t.id = j.at("id").get<std::int64_t>();
    const auto& features = j.at("features");
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& f = schema.feature(i);
        const auto& v = features.at(f.name);
        if (f.kind == FeatureKind::Numeric) {
            t.values.push_back(v.get<double>());
        } else {
            auto code = f.category_code(v.get<std::string>());
            if (!code) throw Error(ErrorCode::Parse, "unknown category in event: " + v.get<std::string>());
            t.values.push_back(*code);
        }
    }
    t.label = label_from_string(j.at("label").get<std::string>());
    return t;
}

AiPrediction prediction_from_json(const nlohmann::json& j) {
    AiPrediction p;
    p.label = label_from_string(j.at("label").get<std::string>());
    p.confidence = j.at("confidence").get<double>();
    p.probability_positive = j.at("probability_positive").get<double>();
    return p;
}


TaskCaseSet task_case_set_from_json(const nlohmann::json& j, const FeatureSchema& schema) {
    try {
        TaskCaseSet set;
        for (const auto& b : j.at("batches")) {
            std::vector<SelectedCase> cases;
            for (const auto& c : b) {
                SelectedCase sc{instance_from_json(c, schema), prediction_from_json(c.at("ai")), false};
                sc.ai_correct = sc.ai.label == sc.instance.label;
                cases.push_back(std::move(sc));
            }
            set.batches.push_back(std::move(cases));
        }
        if (j.contains("coverage")) {
            for (const auto& c : j.at("coverage")) {
                set.coverage.push_back({c.at("feature").get<std::string>(), c.at("common_values").get<std::size_t>(),
                                        c.at("covered").get<std::size_t>()});
            }
        }
        set.restarts_used = j.value("restarts_used", std::size_t{0});
        return set;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("malformed case set: ") + e.what());
    }
}

nlohmann::json to_json(const AiPrediction& p) {
    return {{"label", std::string(to_string(p.label))},
            {"confidence", p.confidence},
            {"probability_positive", p.probability_positive}};
}

nlohmann::json to_json(const CalibrationReport& r) {
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : r.bins) {
        bins.push_back({{"lower", b.lower},
                        {"upper", b.upper},
                        {"count", b.count},
                        {"mean_confidence", b.mean_confidence},
                        {"accuracy", b.accuracy}});
    }
    return {{"bins", bins}, {"expected_calibration_error", r.expected_calibration_error}, {"total", r.total}};
}

nlohmann::json to_json(const Explanation& e) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& fc : e.contributions) c.push_back({{"feature", fc.feature}, {"log_odds", fc.log_odds}});
    return {{"base", e.base}, {"contributions", c}};
}

nlohmann::json to_json(const TaskCaseSet& set, const FeatureSchema& schema) {
    nlohmann::json batches = nlohmann::json::array();
    for (const auto& b : set.batches) {
        nlohmann::json cases = nlohmann::json::array();
        for (const auto& c : b) {
            auto j = instance_to_json(c.instance, schema);
            j["ai"] = to_json(c.ai);
            j["ai_correct"] = c.ai_correct;
            cases.push_back(std::move(j));
        }
        batches.push_back(std::move(cases));
    }
    nlohmann::json coverage = nlohmann::json::array();
    for (const auto& c : set.coverage) {
        coverage.push_back({{"feature", c.feature}, {"common_values", c.common_values}, {"covered", c.covered}});
    }
    return {{"batches", batches}, {"coverage", coverage}, {"restarts_used", set.restarts_used}};
}

nlohmann::json model_to_json(const LinearClassifier& model, const DatasetSplit& split) {
    const auto& s = split.encoding_stats();
    return {{"format", "cltrust.linear_model"},
            {"version", 1},
            {"schema_hash", to_hex(split.schema().hash())},
            {"weights", model.weights},
            {"bias", model.bias},
            {"encoding", {{"means", s.means}, {"stds", s.stds}, {"normalize", s.normalize}}},
            {"training",
             {{"iterations", model.iterations},
              {"final_loss", model.final_loss},
              {"loss_checkpoints", model.loss_checkpoints}}}};
}

std::pair<LinearClassifier, EncodingStats> model_from_json(const nlohmann::json& j,
                                                           const FeatureSchema& schema) {
    try {
        if (j.at("format") != "cltrust.linear_model" || j.at("version") != 1) {
            throw Error(ErrorCode::Parse, "unsupported model document");
        }
        if (j.at("schema_hash").get<std::string>() != to_hex(schema.hash())) {
            throw Error(ErrorCode::InvalidArgument, "model was trained against a different schema");
        }
        LinearClassifier m;
        m.weights = j.at("weights").get<std::vector<double>>();
        m.bias = j.at("bias").get<double>();
        m.iterations = j.at("training").at("iterations").get<std::size_t>();
        m.final_loss = j.at("training").at("final_loss").get<double>();
        m.loss_checkpoints = j.at("training").at("loss_checkpoints").get<std::vector<double>>();
        EncodingStats s;
        s.means = j.at("encoding").at("means").get<std::vector<double>>();
        s.stds = j.at("encoding").at("stds").get<std::vector<double>>();
        s.normalize = j.at("encoding").at("normalize").get<bool>();
        if (m.weights.size() != schema.encoded_size()) {
            throw Error(ErrorCode::InvalidArgument, "model width does not match schema encoding");
        }
        return {std::move(m), std::move(s)};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("malformed model document: ") + e.what());
    }
}

}  // namespace cltrust
