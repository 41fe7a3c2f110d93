#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "cclkit/vqa_data.hpp"

using namespace cclkit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("cclkit_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

} // namespace

TEST_CASE("load_items reads well-formed records in order") {
    TempDir dir;
    auto path = dir.file("items.jsonl");
    write_file(path,
               R"({"item_id":"i1","image_ref":"a.png","question":"what is shown","gold_answer":"left lung","answer_type":"open","modality":"xray"})"
               "\n"
               R"({"item_id":"i2","image_ref":"b.png","question":"is there a fracture","gold_answer":"yes","answer_type":"closed","modality":"ct"})"
               "\n");
    auto items = load_items(path);
    REQUIRE(items.size() == 2);
    CHECK(items[0].item_id == "i1");
    CHECK(items[0].answer_type == AnswerType::Open);
    CHECK(items[1].modality == Modality::CT);
}

TEST_CASE("load_items rejects closed items with non yes/no answers") {
    TempDir dir;
    auto path = dir.file("items.jsonl");
    write_file(path,
               R"({"item_id":"i1","image_ref":"a.png","question":"q","gold_answer":"maybe","answer_type":"closed","modality":"ct"})"
               "\n");
    CHECK_THROWS_WITH(load_items(path), Catch::Matchers::ContainsSubstring("closed"));
}

TEST_CASE("load_items surfaces line numbers and duplicate ids") {
    TempDir dir;
    auto path = dir.file("items.jsonl");
    write_file(path,
               R"({"item_id":"i1","image_ref":"a","question":"q","gold_answer":"g","answer_type":"open","modality":"other"})"
               "\n"
               "not json\n");
    CHECK_THROWS_WITH(load_items(path), Catch::Matchers::ContainsSubstring(":2"));

    write_file(path,
               R"({"item_id":"dup","image_ref":"a","question":"q","gold_answer":"g","answer_type":"open","modality":"other"})"
               "\n"
               R"({"item_id":"dup","image_ref":"b","question":"q2","gold_answer":"g2","answer_type":"open","modality":"other"})"
               "\n");
    CHECK_THROWS_WITH(load_items(path), Catch::Matchers::ContainsSubstring("duplicate item_id"));
}

TEST_CASE("empty file loads as empty list") {
    TempDir dir;
    auto path = dir.file("items.jsonl");
    write_file(path, "");
    CHECK(load_items(path).empty());
    CHECK(load_clusters(path).clusters.empty());
}

TEST_CASE("missing file is an io error") {
    CHECK_THROWS_AS(load_items("/nonexistent/items.jsonl"), IoError);
}

static QuestionCluster full_cluster(const std::string& id) {
    QuestionCluster c;
    c.cluster_id = id;
    c.image_ref = "img.png";
    c.answer_type = AnswerType::Closed;
    c.members = {
        {PerturbationLevel::Original, "is there a fracture", "yes"},
        {PerturbationLevel::Word, "is there any fracture", "yes"},
        {PerturbationLevel::Sentence, "does this scan show a fracture", "yes"},
        {PerturbationLevel::Semantic, "is a bone break visible", "yes"},
    };
    return c;
}

TEST_CASE("cluster validation accepts complete clusters and flags missing levels") {
    auto cluster = full_cluster("c1");
    CHECK(validate_cluster(cluster).empty());

    cluster.members.pop_back(); // drop semantic
    auto warnings = validate_cluster(cluster);
    REQUIRE(warnings.size() == 1);
    CHECK_THAT(warnings[0], Catch::Matchers::ContainsSubstring("semantic"));
}

TEST_CASE("duplicate levels in a cluster are a hard error") {
    auto cluster = full_cluster("c1");
    cluster.members[2].level = PerturbationLevel::Word;
    CHECK_THROWS_AS(validate_cluster(cluster), ValidationError);

    auto two_originals = full_cluster("c2");
    two_originals.members[1].level = PerturbationLevel::Original;
    CHECK_THROWS_AS(validate_cluster(two_originals), ValidationError);
}

TEST_CASE("load_clusters reports warnings without rejecting partial clusters") {
    TempDir dir;
    auto path = dir.file("clusters.jsonl");
    std::vector<QuestionCluster> clusters = {full_cluster("c1")};
    QuestionCluster partial = full_cluster("c2");
    partial.members.resize(2);
    clusters.push_back(partial);
    save_clusters(clusters, path);

    auto result = load_clusters(path);
    CHECK(result.clusters.size() == 2);
    CHECK(result.warnings.size() == 2); // c2 missing sentence + semantic
}

TEST_CASE("save is byte stable and round trips") {
    TempDir dir;
    std::vector<QuestionCluster> clusters = {full_cluster("c1"), full_cluster("c2")};
    clusters[1].members.resize(3);

    auto p1 = dir.file("a.jsonl"), p2 = dir.file("b.jsonl");
    save_clusters(clusters, p1);
    save_clusters(clusters, p2);
    auto bytes1 = read_file(p1);
    CHECK(bytes1 == read_file(p2));
    CHECK(!bytes1.empty());
    CHECK(bytes1.back() == '\n');
    CHECK(bytes1.find("\n\n") == std::string::npos);

    auto loaded = load_clusters(p1);
    CHECK(loaded.clusters == clusters);
}

TEST_CASE("round trip holds over generated clusters") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> extra(0, 3), type(0, 1), coin(0, 1);
    TempDir dir;
    auto path = dir.file("gen.jsonl");
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<QuestionCluster> clusters;
        int n = 1 + extra(rng);
        for (int i = 0; i < n; ++i) {
            QuestionCluster c;
            c.cluster_id = "c" + std::to_string(trial) + "_" + std::to_string(i);
            c.image_ref = "img" + std::to_string(i) + ".png";
            c.answer_type = type(rng) ? AnswerType::Closed : AnswerType::Open;
            std::string gold = c.answer_type == AnswerType::Closed ? "yes" : "left lung";
            c.members.push_back({PerturbationLevel::Original, "base question " + std::to_string(i), gold});
            for (auto level : perturbed_levels)
                if (coin(rng)) c.members.push_back({level, "variant " + std::string(to_string(level)), gold});
            clusters.push_back(std::move(c));
        }
        save_clusters(clusters, path);
        auto loaded = load_clusters(path);
        REQUIRE(loaded.clusters == clusters);
        for (const auto& c : loaded.clusters) {
            CHECK(c.members.size() >= 1);
            CHECK(c.members.size() <= 4);
        }
    }
}

TEST_CASE("predictions round trip and reject duplicates") {
    TempDir dir;
    auto path = dir.file("preds.jsonl");
    std::vector<Prediction> preds = {
        {"c1", PerturbationLevel::Original, "yes", "m"},
        {"c1", PerturbationLevel::Word, "no", "m"},
        {"c1", PerturbationLevel::Word, "no", "m2"},
    };
    write_predictions(preds, path);
    CHECK(load_predictions(path) == preds);

    preds.push_back({"c1", PerturbationLevel::Word, "yes", "m"});
    write_predictions(preds, path);
    CHECK_THROWS_WITH(load_predictions(path), Catch::Matchers::ContainsSubstring("duplicate prediction"));
}

TEST_CASE("unwritable path raises an io error naming the path") {
    CHECK_THROWS_WITH(save_clusters({}, "/nonexistent_dir/out.jsonl"),
                      Catch::Matchers::ContainsSubstring("/nonexistent_dir/out.jsonl"));
}

TEST_CASE("level wire names are lowercase and exact") {
    CHECK(to_string(PerturbationLevel::Original) == "original");
    CHECK(to_string(PerturbationLevel::Word) == "word");
    CHECK(to_string(PerturbationLevel::Sentence) == "sentence");
    CHECK(to_string(PerturbationLevel::Semantic) == "semantic");
    CHECK(level_from_string("semantic") == PerturbationLevel::Semantic);
    CHECK_THROWS_AS(level_from_string("SEMANTIC"), ParseError);
}
