#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cclkit/errors.hpp"
#include "cclkit/text_norm.hpp"
#include "cclkit/vqa_data.hpp"

namespace cclkit {

struct NormalizedAnswer {
    std::vector<std::string> tokens;

    bool empty() const { return tokens.empty(); }
    bool operator==(const NormalizedAnswer&) const = default;
};

inline NormalizedAnswer normalize(std::string_view text) {
    return NormalizedAnswer{normalize_tokens(text)};
}

/// Open-ended score: |multiset-intersection(gold, pred)| / |gold|.
inline double token_recall(const NormalizedAnswer& gold, const NormalizedAnswer& pred) {
    if (gold.empty())
        throw ValidationError("token_recall: gold answer normalizes to no tokens");
    std::map<std::string_view, std::size_t> pred_counts;
    for (const auto& t : pred.tokens) ++pred_counts[t];
    std::size_t hits = 0;
    for (const auto& t : gold.tokens) {
        auto it = pred_counts.find(t);
        if (it != pred_counts.end() && it->second > 0) {
            ++hits;
            --it->second;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(gold.tokens.size());
}

/// Closed-ended score keyed on the first predicted token, since generative
/// models often append justification after "yes"/"no".
inline double closed_accuracy(const NormalizedAnswer& gold, const NormalizedAnswer& pred) {
    if (gold.tokens.size() != 1 || (gold.tokens[0] != "yes" && gold.tokens[0] != "no"))
        throw ValidationError("closed_accuracy: gold answer must normalize to yes or no, got \"" +
                              join_tokens(gold.tokens) + "\"");
    if (pred.empty()) return 0.0;
    return pred.tokens.front() == gold.tokens.front() ? 1.0 : 0.0;
}

struct MemberScore {
    std::string cluster_id;
    PerturbationLevel level = PerturbationLevel::Original;
    double score = 0.0;
};

struct MissingPrediction {
    std::string cluster_id;
    PerturbationLevel level = PerturbationLevel::Original;
};

struct ScoreResult {
    std::vector<MemberScore> scores;        // one per matched prediction
    std::vector<MissingPrediction> missing; // members with no prediction, never imputed as 0
};

/// Scores the given model's predictions against the clusters. Predictions
/// that reference an unknown (cluster_id, level) pair are a hard error
/// listing every offender.
inline ScoreResult score_predictions(std::span<const QuestionCluster> clusters,
                                     std::span<const Prediction> predictions,
                                     std::string_view model_id) {
    std::set<std::pair<std::string_view, PerturbationLevel>> valid_keys;
    for (const auto& c : clusters)
        for (const auto& m : c.members) valid_keys.insert({c.cluster_id, m.level});

    std::map<std::pair<std::string_view, PerturbationLevel>, const Prediction*> by_key;
    std::vector<std::string> offenders;
    for (const auto& p : predictions) {
        if (p.model_id != model_id) continue;
        if (!valid_keys.count({p.cluster_id, p.level})) {
            offenders.push_back(p.cluster_id + "/" + std::string(to_string(p.level)));
            continue;
        }
        by_key[{p.cluster_id, p.level}] = &p;
    }
    if (!offenders.empty()) {
        std::string msg = "predictions reference unknown cluster/level pairs:";
        for (const auto& o : offenders) msg += " " + o;
        throw ValidationError(msg);
    }

    ScoreResult result;
    for (const auto& cluster : clusters) {
        for (const auto& member : cluster.members) {
            auto it = by_key.find({cluster.cluster_id, member.level});
            if (it == by_key.end()) {
                result.missing.push_back({cluster.cluster_id, member.level});
                continue;
            }
            auto gold = normalize(member.gold_answer);
            auto pred = normalize(it->second->answer_text);
            double score = 0.0;
            try {
                score = cluster.answer_type == AnswerType::Closed ? closed_accuracy(gold, pred)
                                                                  : token_recall(gold, pred);
            } catch (const ValidationError& e) {
                throw ValidationError("cluster \"" + cluster.cluster_id + "\" level \"" +
                                      std::string(to_string(member.level)) + "\": " + e.what());
            }
            result.scores.push_back({cluster.cluster_id, member.level, score});
        }
    }
    return result;
}

} // namespace cclkit
