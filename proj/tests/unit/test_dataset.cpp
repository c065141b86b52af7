#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "cltrust/dataset.hpp"
#include "cltrust/error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cltrust;
using namespace cltrust::testing;

namespace {

const char* kHeader = "age,education-num,occupation,marital-status,hours-per-week,income\n";

LoadResult parse(const std::string& text) {
    std::istringstream in(text);
    return parse_dataset(in, adult_schema());
}

}  // namespace

TEST(Schema, CanonicalFeatures) {
    const auto& s = adult_schema();
    ASSERT_EQ(s.size(), 5u);
    EXPECT_EQ(s.feature(kAge).name, "age");
    EXPECT_EQ(s.feature(kEducation).kind, FeatureKind::Numeric);
    EXPECT_EQ(s.feature(kOccupation).kind, FeatureKind::Categorical);
    EXPECT_EQ(s.feature(kMarital).kind, FeatureKind::Categorical);
    EXPECT_EQ(s.feature(kHours).name, "hours-per-week");
    for (const auto& f : s.features()) {
        if (f.kind != FeatureKind::Categorical) continue;
        EXPECT_FALSE(f.categories.empty());
        EXPECT_EQ(std::set<std::string>(f.categories.begin(), f.categories.end()).size(), f.categories.size());
    }
    EXPECT_EQ(s.encoded_size(), 3u + 14u + 7u);
    EXPECT_EQ(s.hash(), FeatureSchema::adult_income().hash());
}

TEST(Loader, WellFormedRows) {
    auto r = parse(std::string(kHeader) +
                   "39,13,Adm-clerical,Never-married,40,<=50K\n"
                   "50,13,Exec-managerial,Married-civ-spouse,13,>50K\n"
                   "38,9,Handlers-cleaners,Divorced,40,<=50K\n");
    ASSERT_EQ(r.instances.size(), 3u);
    EXPECT_EQ(r.dropped, 0u);
    EXPECT_EQ(r.instances[1].label, Label::Over50K);
    EXPECT_EQ(render_value(adult_schema().feature(kOccupation), r.instances[1].values[kOccupation]),
              "Exec-managerial");
}

TEST(Loader, MissingMarkerDropsRow) {
    auto r = parse(std::string(kHeader) +
                   "39,13,?,Never-married,40,<=50K\n"
                   "50,13,Exec-managerial,Married-civ-spouse,13,>50K\n");
    EXPECT_EQ(r.instances.size(), 1u);
    EXPECT_EQ(r.dropped, 1u);
    EXPECT_EQ(r.drop_reasons.at("missing occupation"), 1u);
}

TEST(Loader, RawIncomeBinarizedAtThreshold) {
    auto r = parse(std::string(kHeader) +
                   "39,13,Sales,Never-married,40,50001\n"
                   "39,13,Sales,Never-married,40,50000\n");
    ASSERT_EQ(r.instances.size(), 2u);
    EXPECT_EQ(r.instances[0].label, Label::Over50K);
    EXPECT_EQ(r.instances[1].label, Label::AtMost50K);
}

TEST(Loader, HeaderOrderInsensitiveAndAliasLabel) {
    auto r = parse("income-per-year,hours-per-week,marital-status,occupation,education-num,age,extra\n"
                   ">50K.,45,Married-civ-spouse,Sales,10,44,x\n");
    ASSERT_EQ(r.instances.size(), 1u);
    EXPECT_EQ(r.instances[0].values[kAge], 44.0);
    EXPECT_EQ(r.instances[0].values[kHours], 45.0);
    EXPECT_EQ(r.instances[0].label, Label::Over50K);
}

TEST(Loader, Errors) {
    EXPECT_THROW(load_dataset("/nonexistent/file.csv", adult_schema()), Error);
    EXPECT_THROW(parse(std::string(kHeader) + "39,13,?,Never-married,40,<=50K\n"), Error);
    EXPECT_THROW(parse("age,income\n39,<=50K\n"), Error);
    auto r = parse(std::string(kHeader) +
                   "39,13,Astronaut,Never-married,40,<=50K\n"
                   "200,13,Sales,Never-married,40,<=50K\n"
                   "39,13,Sales,Never-married,40,<=50K\n");
    EXPECT_EQ(r.instances.size(), 1u);
    EXPECT_EQ(r.dropped, 2u);
}

TEST(Split, SizesAndPartition) {
    Rng rng(3);
    auto xs = random_instances(rng, 10);
    auto s = split(xs, adult_schema(), 0.7, 1);
    EXPECT_EQ(s.train().size(), 7u);
    EXPECT_EQ(s.test().size(), 3u);
    std::set<std::int64_t> ids;
    for (const auto& t : s.train()) ids.insert(t.id);
    for (const auto& t : s.test()) EXPECT_TRUE(ids.insert(t.id).second);
    EXPECT_EQ(ids.size(), 10u);
}

TEST(Split, RoundingOnFullCorpusSize) {
    // round(0.7 * 48842) = round(34189.4) = 34189
    Rng rng(4);
    auto xs = random_instances(rng, 48842);
    auto s = split(std::move(xs), adult_schema(), 0.7, 9);
    EXPECT_EQ(s.train().size(), 34189u);
    EXPECT_EQ(s.test().size(), 48842u - 34189u);
}

TEST(Split, DeterministicAndStatsFromTrainOnly) {
    Rng rng(5);
    auto xs = random_instances(rng, 200);
    auto a = split(xs, adult_schema(), 0.7, 11);
    auto b = split(xs, adult_schema(), 0.7, 11);
    EXPECT_EQ(a.train(), b.train());
    EXPECT_EQ(a.test(), b.test());
    auto oracle_stats = oracle::population_stats(adult_schema(), a.train());
    for (std::size_t f : {kAge, kEducation, kHours}) {
        EXPECT_NEAR(a.encoding_stats().means[f], oracle_stats.mean[f], 1e-9);
        EXPECT_NEAR(a.encoding_stats().stds[f], oracle_stats.sd[f], 1e-9);
    }
    EXPECT_THROW(split({xs[0]}, adult_schema(), 0.7, 1), Error);
    EXPECT_THROW(split(xs, adult_schema(), 1.0, 1), Error);
}

TEST(Encode, CategoryMismatchIsUnitDistance) {
    std::vector<TaskInstance> train{make_instance(1, 30, 9, 0, 0, 40), make_instance(2, 50, 13, 1, 2, 50)};
    DatasetSplit s(adult_schema(), train, {});
    auto a = make_instance(10, 40, 11, 3, 2, 45);
    auto b = a;
    b.values[kOccupation] = 5;
    EXPECT_NEAR(euclidean(encode(a, s), encode(b, s)), 1.0, 1e-12);
    auto c = a;
    c.values[kAge] += s.encoding_stats().stds[kAge];
    EXPECT_NEAR(euclidean(encode(a, s), encode(c, s)), 1.0, 1e-12);
    EXPECT_EQ(encode(a, s).size(), adult_schema().encoded_size());
}

TEST(Encode, ConstantColumnEncodesToZero) {
    std::vector<TaskInstance> train{make_instance(1, 30, 9, 0, 0, 40), make_instance(2, 30, 13, 1, 2, 50)};
    DatasetSplit s(adult_schema(), train, {});
    auto a = make_instance(3, 30, 9, 0, 0, 40);
    auto b = make_instance(4, 70, 9, 0, 0, 40);
    EXPECT_EQ(encode(a, s)[0], 0.0);
    EXPECT_EQ(encode(b, s)[0], 0.0);
}

TEST(Encode, InjectiveOnRandomPairs) {
    auto s = random_split(6, 300, 0);
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        auto a = random_instance(rng, 1), b = random_instance(rng, 2);
        b.label = a.label;
        if (a.values == b.values) continue;
        EXPECT_NE(encode(a, s), encode(b, s));
    }
}

TEST(Neighbors, IdentityAndWholeSplit) {
    auto s = random_split(8, 50, 5);
    auto q = s.train()[7];
    q.id = 999999;
    auto nn = nearest_neighbors(q, s, 3);
    EXPECT_EQ(nn[0].distance, 0.0);
    auto all = nearest_neighbors(q, s, s.train().size());
    EXPECT_EQ(all.size(), s.train().size());
    EXPECT_TRUE(std::is_sorted(all.begin(), all.end(),
                               [](const Neighbor& a, const Neighbor& b) { return a.distance < b.distance; }));
    auto self = nearest_neighbors(s.train()[7], s, 3, s.train()[7].id);
    for (const auto& n : self) EXPECT_NE(n.instance->id, s.train()[7].id);
}

TEST(Neighbors, FiveInstanceHandTable) {
    // Raw (unnormalized) ages 20, 22, 25, 26, 40 with identical other fields;
    // query age 24: distances 4, 2, 1, 2, 16. Ties broken by id.
    std::vector<TaskInstance> train;
    const double ages[] = {20, 22, 25, 26, 40};
    for (int i = 0; i < 5; ++i) train.push_back(make_instance(i + 1, ages[i], 10, 0, 0, 40));
    DatasetSplit s(adult_schema(), train, {}, false);
    auto nn = nearest_neighbors(make_instance(100, 24, 10, 0, 0, 40), s, 5);
    const std::int64_t expect_ids[] = {3, 2, 4, 1, 5};
    const double expect_d[] = {1, 2, 2, 4, 16};
    for (int i = 0; i < 5; ++i) {
        EXPECT_EQ(nn[i].instance->id, expect_ids[i]);
        EXPECT_DOUBLE_EQ(nn[i].distance, expect_d[i]);
    }
}

TEST(Neighbors, MatchesBruteForceOnRandomFixtures) {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        auto s = random_split(seed, 20 + seed * 2, 10);
        for (const auto& q : s.test()) {
            auto got = nearest_neighbors(q, s, 10);
            auto want = oracle::neighbors(adult_schema(), s.train(), q, 10);
            ASSERT_EQ(got.size(), want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                EXPECT_NEAR(got[i].distance, want[i].distance, 1e-9);
                if (i + 1 < got.size() && std::abs(want[i].distance - want[i + 1].distance) > 1e-9) {
                    EXPECT_EQ(got[i].instance->id, want[i].instance->id);
                }
            }
        }
    }
}

TEST(MedianDistance, SmallCasesAndDeterminism) {
    std::vector<TaskInstance> same{make_instance(1, 30, 9, 0, 0, 40), make_instance(2, 30, 9, 0, 0, 40)};
    EXPECT_EQ(median_pairwise_distance(DatasetSplit(adult_schema(), same, {}), 100, 1), 0.0);
    std::vector<TaskInstance> line{make_instance(1, 30, 9, 0, 0, 40), make_instance(2, 31, 9, 0, 0, 40),
                                   make_instance(3, 32, 9, 0, 0, 40)};
    EXPECT_DOUBLE_EQ(median_pairwise_distance(DatasetSplit(adult_schema(), line, {}, false), 100, 1), 1.0);
    auto s = random_split(9, 500, 0);
    EXPECT_EQ(median_pairwise_distance(s, 2000, 3), median_pairwise_distance(s, 2000, 3));
    EXPECT_GT(median_pairwise_distance(s, 2000, 3), 0.0);
}

TEST(PermutationImportance, Properties) {
    auto s = random_split(10, 300, 400);
    const auto& schema = adult_schema();
    // Uses marital status only.
    Classifier married = [&schema](std::span<const double> x) {
        std::size_t offset = 2 + schema.feature(kOccupation).categories.size();
        return x[offset + 2] > 0 ? Label::Over50K : Label::AtMost50K;
    };
    EXPECT_EQ(permutation_importance(married, s, "age", 5, 1), 0.0);
    EXPECT_GT(permutation_importance(married, s, "marital-status", 5, 1), 0.0);
    EXPECT_EQ(permutation_importance(married, s, "marital-status", 5, 1),
              permutation_importance(married, s, "marital-status", 5, 1));
    EXPECT_THROW(permutation_importance(married, s, "salary", 5, 1), Error);
}

TEST(PermutationImportance, ConstantColumnIsZero) {
    Rng rng(11);
    auto train = random_instances(rng, 100);
    auto test = random_instances(rng, 100, 1000);
    for (auto& t : test) t.values[kHours] = 40;
    DatasetSplit s(adult_schema(), train, test);
    Classifier uses_hours = [](std::span<const double> x) { return x[23] > 0 ? Label::Over50K : Label::AtMost50K; };
    EXPECT_EQ(permutation_importance(uses_hours, s, "hours-per-week", 4, 2), 0.0);
}

TEST(RealData, LoadsAndSplits) {
    const auto& s = real_split();
    EXPECT_GT(s.train().size(), 20000u);
    const double n = static_cast<double>(s.train().size() + s.test().size());
    EXPECT_EQ(s.train().size(), static_cast<std::size_t>(std::llround(0.7 * n)));
}
