#include "app_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cltrust/error.hpp"

namespace cltrust::app {

namespace pt = boost::property_tree;

namespace {

template <typename T>
T convert(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    T value{};
    in >> value;
    if (in.fail() || !(in >> std::ws).eof()) {
        throw Error(ErrorCode::InvalidArgument, "config key " + key + " has invalid value '" + text + "'");
    }
    return value;
}

template <>
bool convert<bool>(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw Error(ErrorCode::InvalidArgument, "config key " + key + " expects a boolean, got '" + text + "'");
}

template <>
std::string convert<std::string>(const std::string&, const std::string& text) {
    return text;
}

using Setter = std::function<void(AppConfig&, const std::string&)>;
using Getter = std::function<std::string(const AppConfig&)>;

struct Key {
    Setter set;
    Getter get;
};

template <typename T>
std::string show(const T& v) {
    if constexpr (std::is_same_v<T, bool>) {
        return v ? "true" : "false";
    } else if constexpr (std::is_same_v<T, std::string>) {
        return v;
    } else {
        char buf[64];
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, end);
    }
}

#define CLTRUST_KEY(name, expr)                                                                     \
    {                                                                                               \
        name, Key {                                                                                 \
            [](AppConfig& c, const std::string& v) { c.expr = convert<decltype(c.expr)>(name, v); }, \
                [](const AppConfig& c) { return show(c.expr); }                                     \
        }                                                                                           \
    }

const std::map<std::string, Key>& keys() {
    static const std::map<std::string, Key> table = {
        CLTRUST_KEY("data.path", data.path),
        CLTRUST_KEY("data.train_fraction", data.train_fraction),
        CLTRUST_KEY("data.split_seed", data.split_seed),
        CLTRUST_KEY("data.normalize", data.normalize),

        CLTRUST_KEY("model.learning_rate", train.learning_rate),
        CLTRUST_KEY("model.iterations", train.iterations),
        CLTRUST_KEY("model.l2", train.l2),
        CLTRUST_KEY("model.checkpoint_every", train.checkpoint_every),
        CLTRUST_KEY("model.calibration_bin_width", calibration_bin_width),

        CLTRUST_KEY("selection.seed", selection_seed),
        CLTRUST_KEY("selection.batches", selection.batches),
        CLTRUST_KEY("selection.low_per_batch", selection.low_per_batch),
        CLTRUST_KEY("selection.low_correct_per_batch", selection.low_correct_per_batch),
        CLTRUST_KEY("selection.low_mean", selection.low_mean),
        CLTRUST_KEY("selection.high_per_batch", selection.high_per_batch),
        CLTRUST_KEY("selection.high_correct_per_batch", selection.high_correct_per_batch),
        CLTRUST_KEY("selection.high_mean", selection.high_mean),
        CLTRUST_KEY("selection.mean_tolerance", selection.mean_tolerance),
        CLTRUST_KEY("selection.max_restarts", selection.max_restarts),
        CLTRUST_KEY("selection.swaps_per_restart", selection.swaps_per_restart),
        CLTRUST_KEY("selection.common_value_share", selection.common_value_share),

        CLTRUST_KEY("cl.neighbors", cl.n),
        CLTRUST_KEY("cl.median_sample_pairs", cl.median_sample_pairs),
        CLTRUST_KEY("cl.median_seed", cl.median_seed),
        CLTRUST_KEY("cl.confidence_threshold", confidence_threshold),

        CLTRUST_KEY("tree.max_depth", tree.max_depth),
        CLTRUST_KEY("tree.min_leaf", tree.min_leaf),

        CLTRUST_KEY("simulation.agents", experiment.agents),
        CLTRUST_KEY("simulation.replications", experiment.replications),
        CLTRUST_KEY("simulation.seed", experiment.seed),
        CLTRUST_KEY("simulation.threads", experiment.threads),
        CLTRUST_KEY("simulation.noise_min", experiment.noise_min),
        CLTRUST_KEY("simulation.noise_max", experiment.noise_max),
        CLTRUST_KEY("simulation.fidelity_min", experiment.fidelity_min),
        CLTRUST_KEY("simulation.fidelity_max", experiment.fidelity_max),
        CLTRUST_KEY("simulation.misconception_min", experiment.misconception_min),
        CLTRUST_KEY("simulation.misconception_max", experiment.misconception_max),
        CLTRUST_KEY("simulation.agent_max_depth", experiment.agent_template.max_depth),
        CLTRUST_KEY("simulation.agent_stop_probability", experiment.agent_template.stop_probability),
        CLTRUST_KEY("simulation.agent_min_rows", experiment.agent_template.min_rows),
        CLTRUST_KEY("simulation.agent_label_sample", experiment.agent_template.label_sample),
        CLTRUST_KEY("simulation.adopt_shown", experiment.reliance.adopt_shown),
        CLTRUST_KEY("simulation.switch_on_cue", experiment.reliance.switch_on_cue),

        CLTRUST_KEY("service.host", serve.host),
        CLTRUST_KEY("service.port", serve.port),
        CLTRUST_KEY("service.data_dir", serve.data_dir),
        CLTRUST_KEY("service.allow_duplicate_participants", allow_duplicate_participants),

        {"cl.alpha", Key{[](AppConfig& c, const std::string& v) {
                             if (v == "auto") {
                                 c.cl.alpha_auto = true;
                             } else {
                                 c.cl.alpha_auto = false;
                                 c.cl.alpha = convert<double>("cl.alpha", v);
                             }
                         },
                         [](const AppConfig& c) { return c.cl.alpha_auto ? std::string("auto") : show(c.cl.alpha); }}},
        {"cl.tie_policy", Key{[](AppConfig& c, const std::string& v) { c.cl.tie_policy = tie_policy_from_string(v); },
                              [](const AppConfig& c) { return std::string(to_string(c.cl.tie_policy)); }}},
        {"simulation.case_source",
         Key{[](AppConfig& c, const std::string& v) { c.experiment.case_source = case_source_from_string(v); },
             [](const AppConfig& c) { return std::string(to_string(c.experiment.case_source)); }}},
    };
    return table;
}

#undef CLTRUST_KEY

void set_key(AppConfig& config, const std::string& key, const std::string& value) {
    auto it = keys().find(key);
    if (it == keys().end()) throw Error(ErrorCode::InvalidArgument, "unknown config key " + key);
    it->second.set(config, value);
}

}  // namespace

ExperimentConfig AppConfig::experiment_config() const {
    ExperimentConfig e = experiment;
    e.tree = tree;
    e.cl = cl;
    e.confidence_threshold = confidence_threshold;
    e.selection = selection;
    e.selection.confidence_threshold = confidence_threshold;
    return e;
}

ServiceConfig AppConfig::service_config() const {
    ServiceConfig s;
    s.tree = tree;
    s.cl = cl;
    s.confidence_threshold = confidence_threshold;
    s.allow_duplicate_participants = allow_duplicate_participants;
    return s;
}

AppConfig default_config() { return AppConfig{}; }

AppConfig parse_config(const std::string& text) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorCode::Parse, std::string("config: ") + e.what());
    }
    AppConfig config;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw Error(ErrorCode::InvalidArgument, "config key " + section + " is outside a section");
        for (const auto& [key, value] : body) set_key(config, section + "." + key, value.data());
    }
    config.selection.confidence_threshold = config.confidence_threshold;
    validate(config);
    return config;
}

AppConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read config " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

void apply_overrides(AppConfig& config, const std::vector<std::string>& assignments) {
    for (const auto& a : assignments) {
        auto eq = a.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "override must be key=value: " + a);
        set_key(config, a.substr(0, eq), a.substr(eq + 1));
    }
    config.selection.confidence_threshold = config.confidence_threshold;
    validate(config);
}

std::string render_config(const AppConfig& config) {
    std::ostringstream out;
    std::string current;
    for (const auto& [key, k] : keys()) {
        auto dot = key.find('.');
        auto section = key.substr(0, dot);
        if (section != current) {
            out << (current.empty() ? "" : "\n") << "[" << section << "]\n";
            current = section;
        }
        out << key.substr(dot + 1) << " = " << k.get(config) << "\n";
    }
    return out.str();
}

void validate(const AppConfig& c) {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "config: " + m); };
    if (!(c.data.train_fraction > 0.0 && c.data.train_fraction < 1.0)) fail("data.train_fraction must be in (0, 1)");
    if (!(c.train.learning_rate > 0.0)) fail("model.learning_rate must be positive");
    if (c.train.iterations == 0) fail("model.iterations must be positive");
    if (!(c.train.l2 >= 0.0)) fail("model.l2 must be non-negative");
    if (!(c.calibration_bin_width > 0.0 && c.calibration_bin_width <= 0.5)) {
        fail("model.calibration_bin_width must be in (0, 0.5]");
    }
    if (!(c.confidence_threshold > 0.5 && c.confidence_threshold < 1.0)) {
        fail("cl.confidence_threshold must be in (0.5, 1)");
    }
    if (c.serve.port < 0 || c.serve.port > 65535) fail("service.port out of range");
    validate(c.cl);
    validate(c.experiment_config());
}

}  // namespace cltrust::app
