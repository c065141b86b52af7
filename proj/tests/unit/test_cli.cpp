#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cltrust/service.hpp"
#include "commands.hpp"
#include "fixtures.hpp"

using namespace cltrust;
using namespace cltrust::testing;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

// Runs the CLI with stderr folded into the captured output.
RunResult run_cli(const std::string& args) {
    const auto command = quote(cli_path()) + " " + args + " 2>&1";
    RunResult r;
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) return r;
    char buffer[4096];
    while (std::size_t n = fread(buffer, 1, sizeof buffer, pipe)) r.output.append(buffer, n);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string data_arg() { return "--data " + quote(data_file()); }

}  // namespace

TEST(Cli, TrainIsByteReproducible) {
    const auto dir = temp_dir("cli_train");
    auto a = run_cli(data_arg() + " train --out " + quote(dir + "/a"));
    auto b = run_cli(data_arg() + " train --out " + quote(dir + "/b"));
    ASSERT_EQ(a.exit_code, 0) << a.output;
    ASSERT_EQ(b.exit_code, 0) << b.output;
    EXPECT_NE(a.output.find("train rows="), std::string::npos);
    for (const auto* name : {"model.json", "calibration.json"}) {
        const auto x = slurp(dir + "/a/" + name);
        EXPECT_FALSE(x.empty());
        EXPECT_EQ(x, slurp(dir + "/b/" + name)) << name;
    }
    auto model = app::read_json(dir + "/a/model.json");
    EXPECT_TRUE(model.is_object());
}

TEST(Cli, MetricsMatchesLibraryReports) {
    Rng rng(11);
    std::vector<TrialLog> logs = random_logs(rng, 40, StrategyKind::DirectDisplay);
    auto more = random_logs(rng, 40, StrategyKind::AdaptiveWorkflow);
    logs.insert(logs.end(), more.begin(), more.end());
    nlohmann::json in = {{"trial_logs", nlohmann::json::array()}};
    for (const auto& l : logs) in["trial_logs"].push_back(to_json(l));

    const auto dir = temp_dir("cli_metrics");
    app::write_json(dir + "/in.json", in);
    auto r = run_cli("metrics --in " + quote(dir + "/in.json") + " --out " + quote(dir + "/out.json"));
    ASSERT_EQ(r.exit_code, 0) << r.output;

    nlohmann::json expected = nlohmann::json::array();
    for (const auto& rep : build_reports(logs, 0.7, TiePolicy::HumanFirst)) expected.push_back(to_json(rep));
    EXPECT_EQ(app::read_json(dir + "/out.json"), expected);
}

TEST(Cli, MetricsRejectsEmptyLogs) {
    const auto dir = temp_dir("cli_metrics_empty");
    app::write_json(dir + "/in.json", {{"trial_logs", nlohmann::json::array()}});
    auto r = run_cli("metrics --in " + quote(dir + "/in.json") + " --out " + quote(dir + "/out.json"));
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("error code=invalid_argument"), std::string::npos) << r.output;
}

TEST(Cli, InfeasibleSelectionNamesTheConstraint) {
    const auto dir = temp_dir("cli_select");
    const auto tiny = std::string(CLTRUST_TEST_FIXTURES) + "/tiny_adult.csv";
    auto r = run_cli("--data " + quote(tiny) + " select-cases --out " + quote(dir + "/cases.json"));
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("error code=infeasible"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("low-confidence"), std::string::npos) << r.output;
    EXPECT_FALSE(fs::exists(dir + "/cases.json"));
}

TEST(Cli, ReplayVerifiesExportedHashes) {
    const auto& w = small_world();
    SessionService svc(w.split, w.model, w.cases, std::make_shared<MemoryEventStore>());
    auto id = svc.create_session("replay", StrategyKind::DirectDisplay, 5);
    for (int answered = 0, guard = 0; answered < 3 && guard < 20; ++guard) {
        auto step = svc.next_step(id);
        if (!step.contains("case")) continue;
        const auto case_id = step.at("case").at("id").get<std::int64_t>();
        svc.submit_decision(id, {case_id, w.split.find(case_id)->label, "final", std::nullopt});
        ++answered;
    }
    const auto dir = temp_dir("cli_replay");
    auto exported = svc.export_all();
    app::write_json(dir + "/export.json", exported);
    auto ok = run_cli("replay --in " + quote(dir + "/export.json"));
    EXPECT_EQ(ok.exit_code, 0) << ok.output;
    EXPECT_NE(ok.output.find("session " + id), std::string::npos) << ok.output;
    EXPECT_NE(ok.output.find(" ok"), std::string::npos);

    exported["sessions"][0]["state_hash"] = "0000000000000000";
    app::write_json(dir + "/tampered.json", exported);
    auto bad = run_cli("replay --in " + quote(dir + "/tampered.json"));
    EXPECT_EQ(bad.exit_code, 1);
    EXPECT_NE(bad.output.find("error code=conflict"), std::string::npos) << bad.output;
}

TEST(Cli, UsageErrorsExitWithTwo) {
    for (const auto* args : {"", "frobnicate", "metrics", "train --bogus", "--config /nonexistent.ini train"}) {
        auto r = run_cli(args);
        EXPECT_EQ(r.exit_code, 2) << args << ": " << r.output;
        EXPECT_NE(r.output.find("error code=usage"), std::string::npos) << args;
    }
}

TEST(Cli, ConfigErrorsExitWithOne) {
    auto r = run_cli("--set cl.neighbours=3 train");
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("error code=invalid_argument"), std::string::npos) << r.output;
}

TEST(Cli, PrintConfigReflectsOverridesAndSeed) {
    auto r = run_cli("--print-config --set cl.alpha=3 --seed 17 simulate");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("[cl]\nalpha = 3\n"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("\nseed = 17\n"), std::string::npos) << r.output;
    auto reparsed = app::parse_config(r.output);
    EXPECT_DOUBLE_EQ(reparsed.cl.alpha, 3.0);
    EXPECT_EQ(reparsed.experiment.seed, 17u);
}
