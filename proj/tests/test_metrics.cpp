#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <random>

#include "cclkit/metrics.hpp"

using namespace cclkit;

// Test-only brute-force evaluators, kept independent of the library path.
namespace oracle {

double mad(const std::vector<double>& xs) {
    double mu = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double total = 0.0;
    for (double x : xs) total += std::fabs(x - mu);
    return total / static_cast<double>(xs.size());
}

std::optional<double> cv(const std::vector<double>& xs) {
    double mu = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (mu == 0.0) return std::nullopt;
    double sq = 0.0;
    for (double x : xs) sq += (x - mu) * (x - mu);
    double sigma = std::sqrt(sq / static_cast<double>(xs.size()));
    return sigma / mu * 100.0;
}

} // namespace oracle

TEST_CASE("cluster_mad hand fixtures") {
    CHECK(cluster_mad(std::vector{1.0, 1.0, 1.0, 1.0}) == 0.0);
    CHECK(cluster_mad(std::vector{1.0, 0.0, 1.0, 0.0}) == 0.5);
    CHECK(cluster_mad(std::vector{1.0, 1.0, 1.0, 0.0}) == Catch::Approx(0.375).margin(1e-15));
    CHECK_THROWS_AS(cluster_mad({}), ValidationError);
}

TEST_CASE("cluster_cv hand fixtures") {
    CHECK(*cluster_cv(std::vector{1.0, 1.0, 1.0, 1.0}) == 0.0);
    CHECK(*cluster_cv(std::vector{1.0, 0.0, 1.0, 0.0}) == Catch::Approx(100.0).margin(1e-12));
    CHECK(*cluster_cv(std::vector{1.0, 1.0, 1.0, 0.0}) == Catch::Approx(57.735027).margin(1e-6));
    CHECK_FALSE(cluster_cv(std::vector{0.0, 0.0, 0.0, 0.0}).has_value());
    CHECK_THROWS_AS(cluster_cv({}), ValidationError);
}

TEST_CASE("mad and cv match the brute-force oracle on random clusters") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> size(2, 4);
    std::uniform_real_distribution<double> score(0.0, 1.0);
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<double> xs(size(rng));
        for (double& x : xs) x = score(rng);
        CHECK(std::fabs(cluster_mad(xs) - oracle::mad(xs)) < 1e-12);
        auto got = cluster_cv(xs);
        auto want = oracle::cv(xs);
        REQUIRE(got.has_value() == want.has_value());
        if (want) CHECK(std::fabs(*got - *want) < 1e-12);
    }
}

TEST_CASE("mad and cv are permutation invariant") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> score(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> xs(4);
        for (double& x : xs) x = score(rng);
        auto shuffled = xs;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(cluster_mad(xs) == Catch::Approx(cluster_mad(shuffled)).margin(1e-12));
        CHECK(*cluster_cv(xs) == Catch::Approx(*cluster_cv(shuffled)).margin(1e-9));
    }
}

TEST_CASE("mad scales linearly, cv is scale free") {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> score(0.01, 1.0), scale(0.1, 3.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> xs(3);
        for (double& x : xs) x = score(rng);
        double c = scale(rng);
        std::vector<double> scaled = xs;
        for (double& x : scaled) x *= c;
        CHECK(cluster_mad(scaled) == Catch::Approx(c * cluster_mad(xs)).margin(1e-12));
        CHECK(*cluster_cv(scaled) == Catch::Approx(*cluster_cv(xs)).margin(1e-9));
    }
}

static QuestionCluster tiny_cluster(std::string id, AnswerType type, int n_members) {
    QuestionCluster c;
    c.cluster_id = std::move(id);
    c.image_ref = "img";
    c.answer_type = type;
    c.members.push_back({PerturbationLevel::Original, "q", "yes"});
    const PerturbationLevel rest[] = {PerturbationLevel::Word, PerturbationLevel::Sentence,
                                      PerturbationLevel::Semantic};
    for (int i = 0; i < n_members - 1; ++i) c.members.push_back({rest[i], "q" + std::to_string(i), "yes"});
    return c;
}

TEST_CASE("aggregate averages cluster mads") {
    // two clusters, mad 0.0 and 0.5 -> mean_mad_percent 25.0
    std::vector<QuestionCluster> clusters = {tiny_cluster("a", AnswerType::Closed, 4),
                                             tiny_cluster("b", AnswerType::Closed, 4)};
    ScoreResult scored;
    for (auto level : all_levels) scored.scores.push_back({"a", level, 1.0});
    int i = 0;
    for (auto level : all_levels) scored.scores.push_back({"b", level, (i++ % 2) ? 0.0 : 1.0});

    auto report = aggregate(clusters, scored, "m");
    REQUIRE(report.mean_mad_percent.has_value());
    CHECK(*report.mean_mad_percent == Catch::Approx(25.0).margin(1e-12));
    CHECK(report.clusters_total == 2);
    CHECK(report.clusters_scored == 2);
    CHECK(report.members_missing == 0);
}

TEST_CASE("aggregate perfect-consistency fixed point") {
    std::vector<QuestionCluster> clusters = {tiny_cluster("open1", AnswerType::Open, 4),
                                             tiny_cluster("closed1", AnswerType::Closed, 4)};
    ScoreResult scored;
    for (const auto& c : clusters)
        for (const auto& m : c.members) scored.scores.push_back({c.cluster_id, m.level, 1.0});

    auto report = aggregate(clusters, scored, "m");
    CHECK(*report.open_recall == 100.0);
    CHECK(*report.closed_accuracy == 100.0);
    CHECK(*report.mean_mad_percent == 0.0);
    CHECK(*report.mean_cv_percent == 0.0);
    CHECK(report.clusters_cv_undefined == 0);
}

TEST_CASE("aggregate excludes undefined cv and counts it") {
    std::vector<QuestionCluster> clusters = {tiny_cluster("a", AnswerType::Closed, 4),
                                             tiny_cluster("b", AnswerType::Closed, 4)};
    ScoreResult scored;
    for (auto level : all_levels) scored.scores.push_back({"a", level, 0.0}); // all-zero: cv undefined
    for (auto level : all_levels) scored.scores.push_back({"b", level, 1.0});

    auto report = aggregate(clusters, scored, "m");
    CHECK(report.clusters_cv_undefined == 1);
    REQUIRE(report.mean_cv_percent.has_value());
    CHECK(*report.mean_cv_percent == 0.0); // only cluster b enters the mean
    CHECK(*report.mean_mad_percent == 0.0);
}

TEST_CASE("aggregate skips single-member clusters in consistency means") {
    std::vector<QuestionCluster> clusters = {tiny_cluster("solo", AnswerType::Closed, 1),
                                             tiny_cluster("full", AnswerType::Closed, 4)};
    ScoreResult scored;
    scored.scores.push_back({"solo", PerturbationLevel::Original, 1.0});
    int i = 0;
    for (auto level : all_levels) scored.scores.push_back({"full", level, (i++ < 2) ? 1.0 : 0.0});

    auto report = aggregate(clusters, scored, "m");
    CHECK(report.clusters_scored == 2);
    // only "full" (scores 1,1,0,0) contributes: mad = 0.5 -> 50%
    CHECK(*report.mean_mad_percent == Catch::Approx(50.0).margin(1e-12));
    CHECK(*report.mean_cv_percent == Catch::Approx(100.0).margin(1e-9));
}

TEST_CASE("empty scoring yields an all-null report") {
    std::vector<QuestionCluster> clusters = {tiny_cluster("a", AnswerType::Open, 4)};
    ScoreResult scored;
    for (const auto& m : clusters[0].members) scored.missing.push_back({"a", m.level});
    auto report = aggregate(clusters, scored, "m");
    CHECK_FALSE(report.open_recall.has_value());
    CHECK_FALSE(report.mean_mad_percent.has_value());
    CHECK(report.clusters_scored == 0);
    CHECK(report.members_missing == 4);
}

TEST_CASE("report json round trip and table rendering") {
    std::vector<QuestionCluster> clusters = {tiny_cluster("a", AnswerType::Closed, 4)};
    ScoreResult scored;
    for (auto level : all_levels) scored.scores.push_back({"a", level, 1.0});
    auto report = aggregate(clusters, scored, "demo-model");

    auto path = std::string("report_roundtrip.json");
    write_report(report, path);
    auto loaded = load_report(path);
    CHECK(loaded.model_id == report.model_id);
    CHECK(loaded.closed_accuracy == report.closed_accuracy);
    CHECK(loaded.clusters_total == report.clusters_total);

    auto table = render_report_table(std::vector{report});
    CHECK_THAT(table, Catch::Matchers::ContainsSubstring("Recall"));
    CHECK_THAT(table, Catch::Matchers::ContainsSubstring("MAD(v)"));
    CHECK_THAT(table, Catch::Matchers::ContainsSubstring("demo-model"));
    std::remove(path.c_str());
}

TEST_CASE("plot csv has the documented header and one row per cluster") {
    std::vector<ClusterScore> cs = {make_cluster_score("a", {1.0, 0.0}),
                                    make_cluster_score("b", {0.0, 0.0})};
    auto path = std::string("plot_data.csv");
    write_plot_csv(cs, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "cluster_id,mean,mad,cv");
    std::getline(in, line);
    CHECK(line == "a,0.500000,0.500000,100.000000");
    std::getline(in, line);
    CHECK(line == "b,0.000000,0.000000,"); // cv undefined: empty field
    std::remove(path.c_str());
}
