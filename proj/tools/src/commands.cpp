#include "commands.hpp"

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "cltrust/error.hpp"
#include "cltrust/hashing.hpp"
#include "cltrust/http_api.hpp"
#include "cltrust/metrics.hpp"

namespace cltrust::app {

namespace fs = std::filesystem;

Pipeline load_pipeline(const AppConfig& config) {
    const auto schema = FeatureSchema::adult_income();
    auto loaded = load_dataset(config.data.path, schema);
    if (loaded.instances.empty()) throw Error(ErrorCode::InvalidArgument, "no usable rows in " + config.data.path);
    return {split(std::move(loaded.instances), schema, config.data.train_fraction, config.data.split_seed,
                  config.data.normalize),
            loaded.dropped};
}

LinearClassifier obtain_model(const AppConfig& config, const DatasetSplit& split,
                              const std::optional<std::string>& model_path) {
    if (!model_path) return train(split, config.train);
    auto [model, stats] = model_from_json(read_json(*model_path), split.schema());
    if (stats != split.encoding_stats()) {
        throw Error(ErrorCode::InvalidArgument, "model " + *model_path + " was trained on a different data split");
    }
    return model;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) throw Error(ErrorCode::Io, "write failed on " + path);
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Parse, path + " is not valid JSON");
    return j;
}

int run_train(const AppConfig& config, const TrainArgs& args, std::ostream& log) {
    auto p = load_pipeline(config);
    auto model = train(p.split, config.train);
    auto report = calibration_report(model, p.split, p.split.test(), config.calibration_bin_width);
    fs::create_directories(args.out_dir);
    write_json((fs::path(args.out_dir) / "model.json").string(), model_to_json(model, p.split));
    write_json((fs::path(args.out_dir) / "calibration.json").string(), to_json(report));
    log << "train rows=" << p.split.train().size() << " test rows=" << p.split.test().size()
        << " dropped=" << p.dropped_rows << " final_loss=" << model.final_loss
        << " ece=" << report.expected_calibration_error << "\n";
    return 0;
}

int run_select_cases(const AppConfig& config, const SelectArgs& args, std::ostream& log) {
    auto p = load_pipeline(config);
    auto model = obtain_model(config, p.split, args.model);
    auto set = select_task_cases(model, p.split, config.selection, config.selection_seed);
    auto problems = check_task_case_set(set, config.selection);
    if (!problems.empty()) throw Error(ErrorCode::Infeasible, problems.front());
    write_json(args.out, to_json(set, p.split.schema()));
    log << "selected " << set.all().size() << " cases in " << set.batches.size() << " batches after "
        << set.restarts_used << " restarts\n";
    return 0;
}

int run_simulate(const AppConfig& config, const SimulateArgs& args, std::ostream& log) {
    auto p = load_pipeline(config);
    auto model = obtain_model(config, p.split, args.model);
    auto result = run_experiment(config.experiment_config(), p.split, model);
    write_json(args.out, to_json(result));
    log << render_summary(result);
    return 0;
}

namespace {

std::vector<TrialLog> collect_trial_logs(const nlohmann::json& j) {
    std::vector<TrialLog> logs;
    const nlohmann::json* list = &j;
    if (j.is_object()) {
        if (!j.contains("trial_logs")) throw Error(ErrorCode::Parse, "export has no trial_logs");
        list = &j.at("trial_logs");
    }
    if (!list->is_array()) throw Error(ErrorCode::Parse, "trial_logs must be an array");
    for (const auto& t : *list) logs.push_back(trial_log_from_json(t));
    return logs;
}

}  // namespace

int run_metrics(const AppConfig& config, const MetricsArgs& args, std::ostream& log) {
    auto logs = collect_trial_logs(read_json(args.in));
    if (logs.empty()) throw Error(ErrorCode::InvalidArgument, "no trial logs in " + args.in);
    auto reports = build_reports(logs, config.confidence_threshold, config.cl.tie_policy);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : reports) out.push_back(to_json(r));
    write_json(args.out, out);
    log << render_table(reports);
    return 0;
}

int run_serve(const AppConfig& config, const ServeArgs& args, std::ostream& log) {
    auto p = load_pipeline(config);
    auto model = obtain_model(config, p.split, args.model);
    auto cases = args.cases ? task_case_set_from_json(read_json(*args.cases), p.split.schema())
                            : select_task_cases(model, p.split, config.selection, config.selection_seed);
    std::string data_dir = config.serve.data_dir;
    if (const char* env = std::getenv("CLTRUST_DATA_DIR"); env && *env) data_dir = env;
    auto store = std::make_shared<FileEventStore>(data_dir);
    SessionService service(p.split, model, cases, store, config.service_config());

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::thread waiter([signals] {
        int sig = 0;
        sigwait(&signals, &sig);
        stop_server();
    });
    waiter.detach();

    log << "sessions=" << service.session_ids().size() << " data_dir=" << data_dir << "\n";
    run_server(service, config.serve.host, config.serve.port, [&log, &config](int port) {
        log << "listening on http://" << config.serve.host << ":" << port << std::endl;
    });
    return 0;
}

int run_replay(const AppConfig&, const ReplayArgs& args, std::ostream& log) {
    const auto schema = FeatureSchema::adult_income();
    auto j = read_json(args.in);
    std::vector<nlohmann::json> exports;
    if (j.contains("sessions")) {
        for (const auto& s : j.at("sessions")) exports.push_back(s);
    } else {
        exports.push_back(j);
    }
    for (const auto& e : exports) {
        std::vector<EventRecord> events;
        for (const auto& ev : e.at("events")) events.push_back(event_from_json(ev));
        auto session = replay(events, schema);
        auto hash = to_hex(state_hash(session, schema));
        const auto expected = e.at("state_hash").get<std::string>();
        const auto id = e.at("session_id").get<std::string>();
        if (hash != expected) {
            throw Error(ErrorCode::Conflict,
                        "session " + id + " replays to " + hash + " but the export records " + expected);
        }
        log << "session " << id << " events=" << events.size() << " stage=" << to_string(session.stage)
            << " hash=" << hash << " ok\n";
    }
    return 0;
}

}  // namespace cltrust::app
