#pragma once

#include <array>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cclkit/errors.hpp"
#include "cclkit/text_norm.hpp"

namespace cclkit {

using ordered_json = nlohmann::ordered_json;

enum class AnswerType { Open, Closed };
enum class Modality { CT, MRI, XRay, Pathology, Other };
enum class PerturbationLevel { Original, Word, Sentence, Semantic };

inline constexpr std::array<PerturbationLevel, 4> all_levels = {
    PerturbationLevel::Original, PerturbationLevel::Word,
    PerturbationLevel::Sentence, PerturbationLevel::Semantic};

inline constexpr std::array<PerturbationLevel, 3> perturbed_levels = {
    PerturbationLevel::Word, PerturbationLevel::Sentence, PerturbationLevel::Semantic};

// Wire names are lowercase and exact.
inline std::string_view to_string(PerturbationLevel level) {
    switch (level) {
        case PerturbationLevel::Original: return "original";
        case PerturbationLevel::Word: return "word";
        case PerturbationLevel::Sentence: return "sentence";
        case PerturbationLevel::Semantic: return "semantic";
    }
    return "original";
}

inline PerturbationLevel level_from_string(std::string_view s) {
    for (auto level : all_levels)
        if (s == to_string(level)) return level;
    throw ParseError("unknown perturbation level: \"" + std::string(s) + "\"");
}

inline std::string_view to_string(AnswerType t) {
    return t == AnswerType::Open ? "open" : "closed";
}

inline AnswerType answer_type_from_string(std::string_view s) {
    if (s == "open") return AnswerType::Open;
    if (s == "closed") return AnswerType::Closed;
    throw ParseError("unknown answer type: \"" + std::string(s) + "\"");
}

inline std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::CT: return "ct";
        case Modality::MRI: return "mri";
        case Modality::XRay: return "xray";
        case Modality::Pathology: return "pathology";
        case Modality::Other: return "other";
    }
    return "other";
}

inline Modality modality_from_string(std::string_view s) {
    for (auto m : {Modality::CT, Modality::MRI, Modality::XRay, Modality::Pathology, Modality::Other})
        if (s == to_string(m)) return m;
    throw ParseError("unknown modality: \"" + std::string(s) + "\"");
}

/// One original VQA item: a question about an image with a gold answer.
struct VqaItem {
    std::string item_id;
    std::string image_ref;
    std::string question;
    std::string gold_answer;
    AnswerType answer_type = AnswerType::Open;
    Modality modality = Modality::Other;
};

struct ClusterMember {
    PerturbationLevel level = PerturbationLevel::Original;
    std::string question;
    std::string gold_answer;

    bool operator==(const ClusterMember&) const = default;
};

/// An original question plus its perturbed variants, sharing one image and
/// answer type. Complete clusters carry all four levels; partial clusters
/// are legal (1 <= members <= 4, exactly one original).
struct QuestionCluster {
    std::string cluster_id;
    std::string image_ref;
    AnswerType answer_type = AnswerType::Open;
    std::vector<ClusterMember> members;

    bool operator==(const QuestionCluster&) const = default;

    const ClusterMember* find(PerturbationLevel level) const {
        for (const auto& m : members)
            if (m.level == level) return &m;
        return nullptr;
    }
};

struct Prediction {
    std::string cluster_id;
    PerturbationLevel level = PerturbationLevel::Original;
    std::string answer_text;
    std::string model_id;

    bool operator==(const Prediction&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

inline void validate_item(const VqaItem& item) {
    if (trim(item.item_id).empty())
        throw ValidationError("item_id must be nonempty");
    if (trim(item.question).empty())
        throw ValidationError("item \"" + item.item_id + "\": question must be nonempty");
    if (trim(item.gold_answer).empty())
        throw ValidationError("item \"" + item.item_id + "\": gold_answer must be nonempty");
    if (item.answer_type == AnswerType::Closed) {
        auto toks = normalize_tokens(item.gold_answer);
        if (toks.size() != 1 || (toks[0] != "yes" && toks[0] != "no"))
            throw ValidationError("item \"" + item.item_id +
                                  "\": answer_type closed requires gold_answer yes/no, got \"" +
                                  item.gold_answer + "\"");
    }
}

/// Checks all QuestionCluster invariants; returns warnings for missing
/// perturbed levels instead of failing on them.
inline std::vector<std::string> validate_cluster(const QuestionCluster& cluster) {
    if (trim(cluster.cluster_id).empty())
        throw ValidationError("cluster_id must be nonempty");
    if (cluster.members.empty())
        throw ValidationError("cluster \"" + cluster.cluster_id + "\": needs at least one member");

    int originals = 0;
    std::set<PerturbationLevel> seen;
    for (const auto& m : cluster.members) {
        if (m.level == PerturbationLevel::Original) ++originals;
        if (!seen.insert(m.level).second)
            throw ValidationError("cluster \"" + cluster.cluster_id + "\": duplicate level \"" +
                                  std::string(to_string(m.level)) + "\"");
        if (trim(m.question).empty())
            throw ValidationError("cluster \"" + cluster.cluster_id + "\": member question must be nonempty");
        if (trim(m.gold_answer).empty())
            throw ValidationError("cluster \"" + cluster.cluster_id + "\": member gold_answer must be nonempty");
    }
    if (originals != 1)
        throw ValidationError("cluster \"" + cluster.cluster_id + "\": expected exactly one original member, found " +
                              std::to_string(originals));

    std::vector<std::string> warnings;
    for (auto level : perturbed_levels)
        if (!seen.count(level))
            warnings.push_back("cluster \"" + cluster.cluster_id + "\": missing " +
                               std::string(to_string(level)) + " level");
    return warnings;
}

// ---------------------------------------------------------------------------
// JSONL serialization. Save is byte-stable: fixed key order, one record per
// line, "\n" terminated, no trailing blank line.

namespace detail {

inline std::string json_string_field(const ordered_json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string())
        throw ParseError(std::string("missing or non-string field \"") + key + "\"");
    return j[key].get<std::string>();
}

/// Calls fn(line_number, parsed_json) for every nonblank line.
inline void for_each_jsonl_record(const std::string& path,
                                  const std::function<void(std::size_t, const ordered_json&)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        try {
            fn(line_no, j);
        } catch (const ParseError& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

inline void write_jsonl(const std::string& path, const std::vector<ordered_json>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& j : records) out << j.dump() << '\n';
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

} // namespace detail

inline ordered_json to_json(const VqaItem& item) {
    ordered_json j;
    j["item_id"] = item.item_id;
    j["image_ref"] = item.image_ref;
    j["question"] = item.question;
    j["gold_answer"] = item.gold_answer;
    j["answer_type"] = to_string(item.answer_type);
    j["modality"] = to_string(item.modality);
    return j;
}

inline VqaItem item_from_json(const ordered_json& j) {
    VqaItem item;
    item.item_id = detail::json_string_field(j, "item_id");
    item.image_ref = detail::json_string_field(j, "image_ref");
    item.question = detail::json_string_field(j, "question");
    item.gold_answer = detail::json_string_field(j, "gold_answer");
    item.answer_type = answer_type_from_string(detail::json_string_field(j, "answer_type"));
    item.modality = modality_from_string(detail::json_string_field(j, "modality"));
    return item;
}

inline ordered_json to_json(const QuestionCluster& cluster) {
    ordered_json j;
    j["cluster_id"] = cluster.cluster_id;
    j["image_ref"] = cluster.image_ref;
    j["answer_type"] = to_string(cluster.answer_type);
    auto members = ordered_json::array();
    for (const auto& m : cluster.members) {
        ordered_json mj;
        mj["level"] = to_string(m.level);
        mj["question"] = m.question;
        mj["gold_answer"] = m.gold_answer;
        members.push_back(std::move(mj));
    }
    j["members"] = std::move(members);
    return j;
}

inline QuestionCluster cluster_from_json(const ordered_json& j) {
    QuestionCluster cluster;
    cluster.cluster_id = detail::json_string_field(j, "cluster_id");
    cluster.image_ref = detail::json_string_field(j, "image_ref");
    cluster.answer_type = answer_type_from_string(detail::json_string_field(j, "answer_type"));
    if (!j.contains("members") || !j["members"].is_array())
        throw ParseError("missing or non-array field \"members\"");
    for (const auto& mj : j["members"]) {
        ClusterMember m;
        m.level = level_from_string(detail::json_string_field(mj, "level"));
        m.question = detail::json_string_field(mj, "question");
        m.gold_answer = detail::json_string_field(mj, "gold_answer");
        cluster.members.push_back(std::move(m));
    }
    return cluster;
}

inline ordered_json to_json(const Prediction& pred) {
    ordered_json j;
    j["cluster_id"] = pred.cluster_id;
    j["level"] = to_string(pred.level);
    j["answer_text"] = pred.answer_text;
    j["model_id"] = pred.model_id;
    return j;
}

inline Prediction prediction_from_json(const ordered_json& j) {
    Prediction p;
    p.cluster_id = detail::json_string_field(j, "cluster_id");
    p.level = level_from_string(detail::json_string_field(j, "level"));
    p.answer_text = detail::json_string_field(j, "answer_text");
    p.model_id = detail::json_string_field(j, "model_id");
    return p;
}

// ---------------------------------------------------------------------------
// File operations

inline std::vector<VqaItem> load_items(const std::string& path) {
    std::vector<VqaItem> items;
    std::set<std::string> ids;
    detail::for_each_jsonl_record(path, [&](std::size_t, const ordered_json& j) {
        VqaItem item = item_from_json(j);
        validate_item(item);
        if (!ids.insert(item.item_id).second)
            throw ValidationError("duplicate item_id \"" + item.item_id + "\"");
        items.push_back(std::move(item));
    });
    return items;
}

struct ClusterLoadResult {
    std::vector<QuestionCluster> clusters;
    std::vector<std::string> warnings; // incomplete clusters, flagged not rejected
};

inline ClusterLoadResult load_clusters(const std::string& path) {
    ClusterLoadResult result;
    std::set<std::string> ids;
    detail::for_each_jsonl_record(path, [&](std::size_t, const ordered_json& j) {
        QuestionCluster cluster = cluster_from_json(j);
        auto warnings = validate_cluster(cluster);
        if (!ids.insert(cluster.cluster_id).second)
            throw ValidationError("duplicate cluster_id \"" + cluster.cluster_id + "\"");
        result.clusters.push_back(std::move(cluster));
        for (auto& w : warnings) result.warnings.push_back(std::move(w));
    });
    return result;
}

inline void save_clusters(const std::vector<QuestionCluster>& clusters, const std::string& path) {
    std::vector<ordered_json> records;
    records.reserve(clusters.size());
    for (const auto& c : clusters) records.push_back(to_json(c));
    detail::write_jsonl(path, records);
}

inline std::vector<Prediction> load_predictions(const std::string& path) {
    std::vector<Prediction> preds;
    std::set<std::tuple<std::string, PerturbationLevel, std::string>> keys;
    detail::for_each_jsonl_record(path, [&](std::size_t, const ordered_json& j) {
        Prediction p = prediction_from_json(j);
        if (!keys.insert({p.cluster_id, p.level, p.model_id}).second)
            throw ValidationError("duplicate prediction for cluster \"" + p.cluster_id + "\" level \"" +
                                  std::string(to_string(p.level)) + "\" model \"" + p.model_id + "\"");
        preds.push_back(std::move(p));
    });
    return preds;
}

inline void write_predictions(const std::vector<Prediction>& preds, const std::string& path) {
    std::vector<ordered_json> records;
    records.reserve(preds.size());
    for (const auto& p : preds) records.push_back(to_json(p));
    detail::write_jsonl(path, records);
}

inline void save_items(const std::vector<VqaItem>& items, const std::string& path) {
    std::vector<ordered_json> records;
    records.reserve(items.size());
    for (const auto& i : items) records.push_back(to_json(i));
    detail::write_jsonl(path, records);
}

} // namespace cclkit
