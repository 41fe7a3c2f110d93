#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cclkit/errors.hpp"
#include "cclkit/losses.hpp"
#include "cclkit/metrics.hpp"
#include "cclkit/scoring.hpp"
#include "cclkit/vqa_data.hpp"

namespace cclkit {

enum class TrainMode { Sft, Consistency, Contrastive, Ccl };

inline std::string_view to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::Sft: return "sft";
        case TrainMode::Consistency: return "consistency";
        case TrainMode::Contrastive: return "contrastive";
        case TrainMode::Ccl: return "ccl";
    }
    return "ccl";
}

inline TrainMode train_mode_from_string(std::string_view s) {
    for (auto m : {TrainMode::Sft, TrainMode::Consistency, TrainMode::Contrastive, TrainMode::Ccl})
        if (s == to_string(m)) return m;
    throw ParseError("unknown train mode: \"" + std::string(s) + "\"");
}

struct TrainConfig {
    TrainMode mode = TrainMode::Ccl;
    double learning_rate = 0.5;
    int steps = 500;
    int batch_size = 4; // contrastive negatives come from this many neighbours
    double temperature = 0.5;
    std::uint64_t seed = 0;
};

/// Gold answers seen in training, in sorted order. Decoding maps an output
/// id back to its answer text.
struct AnswerSpace {
    std::vector<std::string> answers;

    static AnswerSpace from_clusters(std::span<const QuestionCluster> clusters) {
        std::set<std::string> unique;
        for (const auto& c : clusters)
            for (const auto& m : c.members) unique.insert(trim(m.gold_answer));
        return AnswerSpace{{unique.begin(), unique.end()}};
    }

    int id_of(const std::string& gold) const {
        auto key = trim(gold);
        auto it = std::lower_bound(answers.begin(), answers.end(), key);
        if (it == answers.end() || *it != key)
            throw ValidationError("answer \"" + key + "\" not in the training answer set");
        return static_cast<int>(it - answers.begin());
    }

    const std::string& text_of(std::size_t id) const { return answers.at(id); }
    std::size_t size() const { return answers.size(); }
};

/// Bag-of-embeddings stand-in for an LLM backbone: a token embedding table
/// and a linear answer head over the mean-pooled embeddings. Small enough
/// to train in milliseconds, structured enough to expose hidden states to
/// the contrastive loss.
struct ToyModel {
    std::size_t token_vocab = 0;
    std::size_t dim = 0;
    std::size_t answer_vocab = 0;
    Matrix embedding;  // token_vocab x dim
    Matrix projection; // dim x answer_vocab

    static ToyModel init(std::size_t token_vocab, std::size_t dim, std::size_t answer_vocab,
                         std::uint64_t seed) {
        ToyModel m;
        m.token_vocab = token_vocab;
        m.dim = dim;
        m.answer_vocab = answer_vocab;
        m.embedding = Matrix(token_vocab, dim);
        m.projection = Matrix(dim, answer_vocab);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> dist(-0.1, 0.1);
        for (double& v : m.embedding.data) v = dist(rng);
        for (double& v : m.projection.data) v = dist(rng);
        return m;
    }

    std::vector<int> tokenize(std::string_view question) const {
        std::vector<int> ids;
        for (const auto& word : normalize_tokens(question)) {
            if (word.size() > 1 && word[0] == 't') {
                bool digits = true;
                for (std::size_t i = 1; i < word.size(); ++i)
                    digits = digits && word[i] >= '0' && word[i] <= '9';
                if (digits) {
                    auto id = std::stoull(word.substr(1));
                    if (id < token_vocab) {
                        ids.push_back(static_cast<int>(id));
                        continue;
                    }
                }
            }
            // out-of-layout words hash into the table
            std::uint64_t h = 1469598103934665603ull;
            for (char c : word) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
            ids.push_back(static_cast<int>(h % token_vocab));
        }
        if (ids.empty()) throw ValidationError("question tokenized to nothing: \"" + std::string(question) + "\"");
        return ids;
    }

    Matrix hidden_states(std::span<const int> tokens) const {
        Matrix h(tokens.size(), dim);
        for (std::size_t r = 0; r < tokens.size(); ++r) {
            auto src = embedding.row(static_cast<std::size_t>(tokens[r]));
            std::copy(src.begin(), src.end(), h.row(r).begin());
        }
        return h;
    }

    Matrix logits_from_pooled(std::span<const double> pooled) const {
        Matrix logits(1, answer_vocab, 0.0);
        for (std::size_t d = 0; d < dim; ++d)
            for (std::size_t v = 0; v < answer_vocab; ++v)
                logits.at(0, v) += pooled[d] * projection.at(d, v);
        return logits;
    }

    int greedy_decode(std::span<const int> tokens) const {
        auto pooled = mean_pool(hidden_states(tokens));
        auto logits = logits_from_pooled(pooled);
        std::size_t best = 0;
        for (std::size_t v = 1; v < answer_vocab; ++v)
            if (logits.at(0, v) > logits.at(0, best)) best = v;
        return static_cast<int>(best);
    }

    bool all_finite() const { return embedding.all_finite() && projection.all_finite(); }
};

struct TrainResult {
    std::vector<double> loss_curve; // one entry per step
};

namespace detail {

struct MemberForward {
    PerturbationLevel level;
    std::vector<int> tokens;
    Matrix hidden;
    std::vector<double> pooled;
    Matrix logits; // 1 x answer_vocab
    int target = 0;
};

struct ParamGrads {
    Matrix d_embedding;
    Matrix d_projection;

    explicit ParamGrads(const ToyModel& m)
        : d_embedding(m.token_vocab, m.dim), d_projection(m.dim, m.answer_vocab) {}
};

// logits = pooled . projection, so d(pooled) = projection . d(logits) and
// d(projection) = pooled (x) d(logits).
inline void backprop_logits(const ToyModel& model, const MemberForward& fwd, const Matrix& dlogits,
                            ParamGrads& grads, std::vector<double>& dpooled) {
    for (std::size_t d = 0; d < model.dim; ++d) {
        double acc = 0.0;
        for (std::size_t v = 0; v < model.answer_vocab; ++v) {
            grads.d_projection.at(d, v) += fwd.pooled[d] * dlogits.at(0, v);
            acc += model.projection.at(d, v) * dlogits.at(0, v);
        }
        dpooled[d] += acc;
    }
}

inline void backprop_pooled(const MemberForward& fwd, std::span<const double> dpooled,
                            ParamGrads& grads) {
    double inv_len = 1.0 / static_cast<double>(fwd.tokens.size());
    for (int tok : fwd.tokens) {
        auto row = grads.d_embedding.row(static_cast<std::size_t>(tok));
        for (std::size_t d = 0; d < dpooled.size(); ++d) row[d] += dpooled[d] * inv_len;
    }
}

inline void backprop_hidden(const MemberForward& fwd, const Matrix& dhidden, ParamGrads& grads) {
    for (std::size_t r = 0; r < dhidden.rows; ++r) {
        auto row = grads.d_embedding.row(static_cast<std::size_t>(fwd.tokens[r]));
        auto src = dhidden.row(r);
        for (std::size_t d = 0; d < dhidden.cols; ++d) row[d] += src[d];
    }
}

} // namespace detail

/// Full-batch gradient descent with the mode's loss. Clusters are grouped
/// in input order, batch_size at a time; a cluster's contrastive negatives
/// are the pooled original embeddings of the other clusters in its group.
inline TrainResult train(ToyModel& model, std::span<const QuestionCluster> clusters,
                         const AnswerSpace& answers, const TrainConfig& config) {
    if (clusters.empty()) throw ValidationError("train: no clusters");
    if (config.steps < 0) throw ValidationError("train: negative step count");
    if (config.batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    if (!(config.temperature > 0.0)) throw ValidationError("train: temperature must be positive");
    if (answers.size() != model.answer_vocab)
        throw ValidationError("train: answer space size does not match the model head");

    // Tokenization is parameter independent; do it once.
    std::vector<std::vector<detail::MemberForward>> tokenized(clusters.size());
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (const auto& member : clusters[c].members) {
            detail::MemberForward fwd;
            fwd.level = member.level;
            fwd.tokens = model.tokenize(member.question);
            fwd.target = answers.id_of(member.gold_answer);
            tokenized[c].push_back(std::move(fwd));
        }
    }

    const std::size_t group_size = static_cast<std::size_t>(config.batch_size);
    const double inv_n = 1.0 / static_cast<double>(clusters.size());
    const bool uses_contrastive =
        config.mode == TrainMode::Contrastive || config.mode == TrainMode::Ccl;

    TrainResult result;
    result.loss_curve.reserve(static_cast<std::size_t>(config.steps));

    for (int step = 0; step < config.steps; ++step) {
        for (auto& members : tokenized) {
            for (auto& fwd : members) {
                fwd.hidden = model.hidden_states(fwd.tokens);
                fwd.pooled = mean_pool(fwd.hidden);
                fwd.logits = model.logits_from_pooled(fwd.pooled);
            }
        }

        detail::ParamGrads grads(model);
        double step_loss = 0.0;

        for (std::size_t c = 0; c < clusters.size(); ++c) {
            auto& members = tokenized[c];
            auto* original = &members[0];
            for (auto& fwd : members)
                if (fwd.level == PerturbationLevel::Original) original = &fwd;

            std::vector<std::size_t> negative_sources;
            std::vector<std::vector<double>> negatives;
            if (uses_contrastive) {
                std::size_t group_begin = (c / group_size) * group_size;
                std::size_t group_end = std::min(group_begin + group_size, clusters.size());
                for (std::size_t j = group_begin; j < group_end; ++j) {
                    if (j == c) continue;
                    for (const auto& fwd : tokenized[j]) {
                        if (fwd.level != PerturbationLevel::Original) continue;
                        negative_sources.push_back(j);
                        negatives.push_back(fwd.pooled);
                    }
                }
            }

            auto chain_negative_grads = [&](const std::vector<std::vector<double>>& grad_negs) {
                for (std::size_t k = 0; k < grad_negs.size(); ++k) {
                    for (const auto& fwd : tokenized[negative_sources[k]]) {
                        if (fwd.level != PerturbationLevel::Original) continue;
                        detail::backprop_pooled(fwd, grad_negs[k], grads);
                    }
                }
            };

            switch (config.mode) {
                case TrainMode::Sft: {
                    auto loss = ar_cross_entropy(original->logits, std::vector<int>{original->target});
                    step_loss += loss.value;
                    std::vector<double> dpooled(model.dim, 0.0);
                    detail::backprop_logits(model, *original, loss.grad_logits, grads, dpooled);
                    detail::backprop_pooled(*original, dpooled, grads);
                    break;
                }
                case TrainMode::Consistency: {
                    for (auto& fwd : members) {
                        auto loss = ar_cross_entropy(fwd.logits, std::vector<int>{fwd.target});
                        step_loss += loss.value;
                        std::vector<double> dpooled(model.dim, 0.0);
                        detail::backprop_logits(model, fwd, loss.grad_logits, grads, dpooled);
                        detail::backprop_pooled(fwd, dpooled, grads);
                    }
                    break;
                }
                case TrainMode::Contrastive: {
                    // answer supervision on the original plus the contrastive pull
                    auto loss = ar_cross_entropy(original->logits, std::vector<int>{original->target});
                    step_loss += loss.value;
                    std::vector<double> dpooled(model.dim, 0.0);
                    detail::backprop_logits(model, *original, loss.grad_logits, grads, dpooled);

                    std::vector<const detail::MemberForward*> positives;
                    for (const auto& fwd : members)
                        if (fwd.level != PerturbationLevel::Original) positives.push_back(&fwd);
                    if (!positives.empty()) {
                        std::vector<std::vector<double>> positive_pooled;
                        for (const auto* p : positives) positive_pooled.push_back(p->pooled);
                        auto nce = info_nce(original->pooled, positive_pooled, negatives,
                                            config.temperature);
                        step_loss += nce.value;
                        for (std::size_t d = 0; d < model.dim; ++d) dpooled[d] += nce.grad_anchor[d];
                        for (std::size_t p = 0; p < positives.size(); ++p)
                            detail::backprop_pooled(*positives[p], nce.grad_positives[p], grads);
                        chain_negative_grads(nce.grad_negatives);
                    }
                    detail::backprop_pooled(*original, dpooled, grads);
                    break;
                }
                case TrainMode::Ccl: {
                    LossInput input;
                    input.temperature = config.temperature;
                    for (const auto& fwd : members) {
                        input.logits[fwd.level] = fwd.logits;
                        input.targets[fwd.level] = {fwd.target};
                        input.hidden[fwd.level] = fwd.hidden;
                    }
                    auto loss = total_loss(input, negatives);
                    step_loss += loss.value;
                    for (auto& fwd : members) {
                        std::vector<double> dpooled(model.dim, 0.0);
                        detail::backprop_logits(model, fwd, loss.grad_logits.at(fwd.level), grads,
                                                dpooled);
                        detail::backprop_pooled(fwd, dpooled, grads);
                        detail::backprop_hidden(fwd, loss.grad_hidden.at(fwd.level), grads);
                    }
                    chain_negative_grads(loss.grad_negatives);
                    break;
                }
            }
        }

        step_loss *= inv_n;
        if (!std::isfinite(step_loss))
            throw Error("training diverged: non-finite loss at step " + std::to_string(step));

        for (std::size_t i = 0; i < model.embedding.data.size(); ++i)
            model.embedding.data[i] -= config.learning_rate * inv_n * grads.d_embedding.data[i];
        for (std::size_t i = 0; i < model.projection.data.size(); ++i)
            model.projection.data[i] -= config.learning_rate * inv_n * grads.d_projection.data[i];
        if (!model.all_finite())
            throw Error("training diverged: non-finite parameters at step " + std::to_string(step));

        result.loss_curve.push_back(step_loss);
    }
    return result;
}

struct EvalResult {
    RobustnessReport report;
    std::vector<Prediction> predictions;
    std::vector<ClusterScore> cluster_scores;
};

/// Greedy decode per member, then score and aggregate like any other model.
inline EvalResult eval_consistency(const ToyModel& model, std::span<const QuestionCluster> clusters,
                                   const AnswerSpace& answers, std::string model_id) {
    EvalResult result;
    for (const auto& cluster : clusters) {
        for (const auto& member : cluster.members) {
            int answer_id = model.greedy_decode(model.tokenize(member.question));
            result.predictions.push_back(
                {cluster.cluster_id, member.level, answers.text_of(static_cast<std::size_t>(answer_id)),
                 model_id});
        }
    }
    auto scored = score_predictions(clusters, result.predictions, model_id);
    result.cluster_scores = collect_cluster_scores(clusters, scored.scores);
    result.report = aggregate(clusters, scored, std::move(model_id));
    return result;
}

/// CSV loss curve: header "step,loss", one row per training step.
inline void write_loss_curve(std::span<const double> curve, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "step,loss\n";
    for (std::size_t i = 0; i < curve.size(); ++i)
        out << i << ',' << detail::format_fixed(curve[i], 9) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

} // namespace cclkit
