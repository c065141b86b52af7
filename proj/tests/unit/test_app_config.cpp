#include <fstream>

#include <gtest/gtest.h>

#include "app_config.hpp"
#include "cltrust/error.hpp"
#include "fixtures.hpp"

using namespace cltrust;
using namespace cltrust::app;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Io;
}

}  // namespace

TEST(AppConfig, DefaultsMatchLibraryDefaults) {
    auto c = default_config();
    EXPECT_EQ(c.cl.n, 10u);
    EXPECT_DOUBLE_EQ(c.cl.alpha, 2.0);
    EXPECT_FALSE(c.cl.alpha_auto);
    EXPECT_DOUBLE_EQ(c.confidence_threshold, 0.7);
    EXPECT_DOUBLE_EQ(c.data.train_fraction, 0.7);
    EXPECT_EQ(c.data.split_seed, 42u);
    EXPECT_EQ(c.tree.max_depth, 3u);
    EXPECT_EQ(c.experiment.case_source, CaseSource::Selector);
    EXPECT_NO_THROW(validate(c));
}

TEST(AppConfig, ParsesSectionsAndKeys) {
    auto c = parse_config(
        "[data]\ntrain_fraction = 0.6\nsplit_seed = 9\n"
        "[cl]\nneighbors = 5\nalpha = auto\ntie_policy = ai-first\n"
        "[simulation]\nagents = 12\ncase_source = random\nadopt_shown = 0.5\n"
        "[service]\nport = 9001\n");
    EXPECT_DOUBLE_EQ(c.data.train_fraction, 0.6);
    EXPECT_EQ(c.data.split_seed, 9u);
    EXPECT_EQ(c.cl.n, 5u);
    EXPECT_TRUE(c.cl.alpha_auto);
    EXPECT_EQ(c.cl.tie_policy, TiePolicy::AiFirst);
    EXPECT_EQ(c.experiment.agents, 12u);
    EXPECT_EQ(c.experiment.case_source, CaseSource::RandomSample);
    EXPECT_DOUBLE_EQ(c.experiment.reliance.adopt_shown, 0.5);
    EXPECT_EQ(c.serve.port, 9001);
}

TEST(AppConfig, RejectsUnknownKeysAndBadValues) {
    EXPECT_EQ(code_of([] { parse_config("[cl]\nneighbours = 5\n"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { parse_config("[nope]\nx = 1\n"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { parse_config("top = 1\n"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { parse_config("[cl]\nneighbors = many\n"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { parse_config("[data]\nnormalize = maybe\n"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { parse_config("[cl\nneighbors = 5\n"); }), ErrorCode::Parse);
}

TEST(AppConfig, ValidationRejectsOutOfRange) {
    EXPECT_EQ(code_of([] { parse_config("[data]\ntrain_fraction = 1.0\n"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { parse_config("[model]\niterations = 0\n"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { parse_config("[cl]\nconfidence_threshold = 0.5\n"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { parse_config("[service]\nport = 70000\n"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { parse_config("[model]\ncalibration_bin_width = 0.6\n"); }), ErrorCode::InvalidArgument);
}

TEST(AppConfig, OverridesApplyOnTop) {
    auto c = default_config();
    apply_overrides(c, {"cl.alpha=3.5", "simulation.threads=2", "cl.confidence_threshold=0.8"});
    EXPECT_DOUBLE_EQ(c.cl.alpha, 3.5);
    EXPECT_EQ(c.experiment.threads, 2u);
    EXPECT_DOUBLE_EQ(c.selection.confidence_threshold, 0.8);
    EXPECT_EQ(code_of([&] { apply_overrides(c, {"cl.alpha"}); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { apply_overrides(c, {"cl.beta=1"}); }), ErrorCode::InvalidArgument);
}

TEST(AppConfig, RenderRoundTrips) {
    auto c = default_config();
    apply_overrides(c, {"cl.alpha=auto", "tree.max_depth=4", "data.path=/tmp/x.csv", "simulation.noise_max=0.25"});
    const auto text = render_config(c);
    EXPECT_EQ(render_config(parse_config(text)), text);
    EXPECT_EQ(render_config(parse_config(render_config(default_config()))), render_config(default_config()));
    EXPECT_NE(text.find("[cl]"), std::string::npos);
    EXPECT_NE(text.find("alpha = auto"), std::string::npos);
}

TEST(AppConfig, LoadsFromFile) {
    const auto path = cltrust::testing::temp_dir("app_config") + "/c.ini";
    std::ofstream(path) << "[tree]\nmax_depth = 2\n";
    EXPECT_EQ(load_config(path).tree.max_depth, 2u);
    EXPECT_EQ(code_of([] { load_config("/nonexistent/c.ini"); }), ErrorCode::Io);
}

TEST(AppConfig, DerivedConfigsCarrySharedSettings) {
    auto c = default_config();
    apply_overrides(c, {"cl.neighbors=7", "tree.min_leaf=5", "cl.confidence_threshold=0.75",
                        "service.allow_duplicate_participants=true"});
    auto e = c.experiment_config();
    EXPECT_EQ(e.cl.n, 7u);
    EXPECT_EQ(e.tree.min_leaf, 5u);
    EXPECT_DOUBLE_EQ(e.confidence_threshold, 0.75);
    EXPECT_DOUBLE_EQ(e.selection.confidence_threshold, 0.75);
    auto s = c.service_config();
    EXPECT_EQ(s.cl.n, 7u);
    EXPECT_EQ(s.tree.min_leaf, 5u);
    EXPECT_TRUE(s.allow_duplicate_participants);
}
