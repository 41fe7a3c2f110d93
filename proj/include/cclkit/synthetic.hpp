#pragma once

#include <random>
#include <string>
#include <vector>

#include "cclkit/errors.hpp"
#include "cclkit/vqa_data.hpp"

namespace cclkit {

/// Synthetic paraphrase task. Every concept has one gold answer and many
/// surface forms built from three kinds of tokens:
///
///   - one content token unique to the concept (the actual signal),
///   - "style" tokens that co-occur with the gold answer ONLY in the
///     original training phrasing (a spurious shortcut),
///   - filler tokens, drawn from disjoint train/test pools so that train
///     and test surface forms can never coincide.
///
/// A model that keys on the style tokens answers the original training
/// questions perfectly and falls apart on reworded test questions, which
/// draw style tokens at random. A model that keys on the content token
/// answers every variant alike.
struct SyntheticTask {
    std::size_t concept_count = 8;
    std::size_t surface_forms_per_concept = 4; // one original + 3 perturbed levels
    std::size_t answer_vocab = 4;
    std::uint64_t seed = 0;

    std::size_t filler_pool = 8; // per split

    std::size_t token_vocab() const { return concept_count + answer_vocab + 2 * filler_pool; }
};

struct SyntheticData {
    std::vector<QuestionCluster> train;
    std::vector<QuestionCluster> test;
    std::vector<std::string> answers; // gold answer text per answer id
    std::size_t token_vocab = 0;
};

namespace detail {

inline std::string synthetic_token(std::size_t id) { return "t" + std::to_string(id); }

} // namespace detail

inline SyntheticData gen_synthetic(const SyntheticTask& task) {
    if (task.concept_count < 2) throw ValidationError("gen_synthetic: need at least 2 concepts");
    if (task.answer_vocab < 2) throw ValidationError("gen_synthetic: need at least 2 answers");
    if (task.surface_forms_per_concept < 4)
        throw ValidationError("gen_synthetic: need at least 4 surface forms per concept");

    std::mt19937_64 rng(task.seed);

    // Token id layout: [0, C) content, [C, C+A) style, then the train and
    // test filler pools.
    const std::size_t content_base = 0;
    const std::size_t style_base = task.concept_count;
    const std::size_t train_filler_base = style_base + task.answer_vocab;
    const std::size_t test_filler_base = train_filler_base + task.filler_pool;

    std::uniform_int_distribution<std::size_t> any_answer(0, task.answer_vocab - 1);
    std::uniform_int_distribution<std::size_t> any_filler(0, task.filler_pool - 1);

    auto make_question = [&](std::size_t concept_id, std::size_t style_a, std::size_t style_b,
                             std::size_t filler_base) {
        std::vector<std::size_t> ids = {content_base + concept_id, style_base + style_a,
                                        style_base + style_b, filler_base + any_filler(rng),
                                        filler_base + any_filler(rng)};
        std::shuffle(ids.begin(), ids.end(), rng);
        std::string text;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i) text.push_back(' ');
            text += detail::synthetic_token(ids[i]);
        }
        return text;
    };

    SyntheticData data;
    data.token_vocab = task.token_vocab();
    for (std::size_t a = 0; a < task.answer_vocab; ++a)
        data.answers.push_back("answer" + std::to_string(a));

    for (std::size_t c = 0; c < task.concept_count; ++c) {
        std::size_t gold = c % task.answer_vocab;
        const std::string& gold_text = data.answers[gold];

        QuestionCluster train_cluster;
        train_cluster.cluster_id = "train-c" + std::to_string(c);
        train_cluster.image_ref = "synthetic://concept/" + std::to_string(c);
        train_cluster.answer_type = AnswerType::Open;
        // The original phrasing carries the gold-answer style tokens; the
        // perturbed variants draw style tokens at random, so only the
        // content token stays predictive across the whole cluster.
        train_cluster.members.push_back({PerturbationLevel::Original,
                                         make_question(c, gold, gold, train_filler_base), gold_text});
        for (auto level : perturbed_levels)
            train_cluster.members.push_back(
                {level, make_question(c, any_answer(rng), any_answer(rng), train_filler_base), gold_text});
        data.train.push_back(std::move(train_cluster));

        QuestionCluster test_cluster;
        test_cluster.cluster_id = "test-c" + std::to_string(c);
        test_cluster.image_ref = "synthetic://concept/" + std::to_string(c);
        test_cluster.answer_type = AnswerType::Open;
        for (auto level : all_levels)
            test_cluster.members.push_back(
                {level, make_question(c, any_answer(rng), any_answer(rng), test_filler_base), gold_text});
        data.test.push_back(std::move(test_cluster));
    }
    return data;
}

} // namespace cclkit
