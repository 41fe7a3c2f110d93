#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "cclkit/errors.hpp"
#include "cclkit/matrix.hpp"
#include "cclkit/vqa_data.hpp"

namespace cclkit {

inline constexpr double kDefaultTemperature = 0.07;
inline constexpr double kMinVectorNorm = 1e-12;

/// log(sum(exp(z))) with max subtraction.
inline double log_sum_exp(std::span<const double> z) {
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

struct AutoregressiveLoss {
    double value = 0.0;
    Matrix grad_logits;
};

/// Token-level autoregressive cross entropy over a T x V logits matrix:
/// sum_t (logsumexp(row_t) - logit[t, y_t]). The gradient per row is
/// softmax(row) minus the one-hot target.
inline AutoregressiveLoss ar_cross_entropy(const Matrix& logits, std::span<const int> targets) {
    if (logits.rows == 0) throw ValidationError("ar_cross_entropy: empty logits (T = 0)");
    if (logits.cols == 0) throw ValidationError("ar_cross_entropy: empty vocabulary (V = 0)");
    if (targets.size() != logits.rows)
        throw ValidationError("ar_cross_entropy: targets length " + std::to_string(targets.size()) +
                              " does not match T = " + std::to_string(logits.rows));

    AutoregressiveLoss out;
    out.grad_logits = Matrix(logits.rows, logits.cols);
    for (std::size_t t = 0; t < logits.rows; ++t) {
        int y = targets[t];
        if (y < 0 || static_cast<std::size_t>(y) >= logits.cols)
            throw ValidationError("ar_cross_entropy: target id " + std::to_string(y) +
                                  " out of range at position " + std::to_string(t));
        auto row = logits.row(t);
        double lse = log_sum_exp(row);
        out.value += lse - row[static_cast<std::size_t>(y)];
        auto grad_row = out.grad_logits.row(t);
        for (std::size_t v = 0; v < logits.cols; ++v) grad_row[v] = std::exp(row[v] - lse);
        grad_row[static_cast<std::size_t>(y)] -= 1.0;
    }
    return out;
}

/// Per-example inputs for the joint objective. A level's entries are
/// optional except for the original; absent perturbed levels contribute
/// zero terms, which keeps partial clusters trainable.
struct LossInput {
    std::map<PerturbationLevel, Matrix> logits;            // T x V per level
    std::map<PerturbationLevel, std::vector<int>> targets; // length T per level
    std::map<PerturbationLevel, Matrix> hidden;            // L x D per level
    std::size_t vocab_size = 0;                            // 0 = take V from the logits
    double temperature = kDefaultTemperature;
};

inline void validate(const LossInput& input) {
    if (!input.logits.count(PerturbationLevel::Original))
        throw ValidationError("loss input: original logits are required");
    if (!(input.temperature > 0.0))
        throw ValidationError("loss input: temperature must be positive");
    for (const auto& [level, m] : input.logits) {
        if (!m.all_finite())
            throw ValidationError("loss input: non-finite logits at level " + std::string(to_string(level)));
        if (input.vocab_size && m.cols != input.vocab_size)
            throw ValidationError("loss input: logits columns disagree with vocab_size at level " +
                                  std::string(to_string(level)));
        auto it = input.targets.find(level);
        if (it == input.targets.end())
            throw ValidationError("loss input: missing targets for level " + std::string(to_string(level)));
        if (it->second.size() != m.rows)
            throw ValidationError("loss input: targets length does not match logits rows at level " +
                                  std::string(to_string(level)));
    }
    std::size_t hidden_cols = 0;
    for (const auto& [level, m] : input.hidden) {
        if (m.rows == 0) throw ValidationError("loss input: empty hidden state at level " +
                                               std::string(to_string(level)));
        if (!m.all_finite())
            throw ValidationError("loss input: non-finite hidden state at level " +
                                  std::string(to_string(level)));
        if (hidden_cols == 0) hidden_cols = m.cols;
        if (m.cols != hidden_cols)
            throw ValidationError("loss input: hidden state widths disagree across levels");
    }
}

struct ConsistencyLoss {
    double value = 0.0;
    std::map<PerturbationLevel, Matrix> grad_logits;
};

/// Sum of autoregressive losses over the original and every present
/// perturbed level.
inline ConsistencyLoss consistency_loss(const LossInput& input) {
    validate(input);
    ConsistencyLoss out;
    for (auto level : all_levels) {
        auto it = input.logits.find(level);
        if (it == input.logits.end()) continue;
        auto term = ar_cross_entropy(it->second, input.targets.at(level));
        out.value += term.value;
        out.grad_logits[level] = std::move(term.grad_logits);
    }
    return out;
}

/// Column-wise mean of an L x D hidden-state matrix.
inline std::vector<double> mean_pool(const Matrix& hidden) {
    if (hidden.rows == 0) throw ValidationError("mean_pool: empty matrix (L = 0)");
    std::vector<double> pooled(hidden.cols, 0.0);
    for (std::size_t r = 0; r < hidden.rows; ++r) {
        auto row = hidden.row(r);
        for (std::size_t c = 0; c < hidden.cols; ++c) pooled[c] += row[c];
    }
    for (double& v : pooled) v /= static_cast<double>(hidden.rows);
    return pooled;
}

inline double cosine_sim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("cosine_sim: dimension mismatch");
    double na = norm(a), nb = norm(b);
    if (na < kMinVectorNorm || nb < kMinVectorNorm)
        throw ValidationError("cosine_sim: vector norm below tolerance, direction undefined");
    return dot(a, b) / (na * nb);
}

namespace detail {

struct CosineWithGrad {
    double value;
    std::vector<double> grad_a;
    std::vector<double> grad_b;
};

inline CosineWithGrad cosine_with_grad(std::span<const double> a, std::span<const double> b) {
    CosineWithGrad out;
    double na = norm(a), nb = norm(b);
    if (na < kMinVectorNorm || nb < kMinVectorNorm)
        throw ValidationError("cosine_sim: vector norm below tolerance, direction undefined");
    double d = dot(a, b);
    out.value = d / (na * nb);
    out.grad_a.resize(a.size());
    out.grad_b.resize(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.grad_a[i] = b[i] / (na * nb) - out.value * a[i] / (na * na);
        out.grad_b[i] = a[i] / (na * nb) - out.value * b[i] / (nb * nb);
    }
    return out;
}

} // namespace detail

struct InfoNceLoss {
    double value = 0.0;
    std::vector<double> grad_anchor;
    std::vector<std::vector<double>> grad_positives;
    std::vector<std::vector<double>> grad_negatives;
};

/// Temperature-scaled contrastive loss over cosine similarities. Each
/// positive gets its own denominator: its own exponent plus the negatives'
/// exponents. Other positives never enter the denominator. With zero
/// negatives every ratio is 1 and the loss is exactly zero.
inline InfoNceLoss info_nce(std::span<const double> anchor,
                            const std::vector<std::vector<double>>& positives,
                            const std::vector<std::vector<double>>& negatives,
                            double tau) {
    if (positives.empty()) throw ValidationError("info_nce: at least one positive required");
    if (!(tau > 0.0)) throw ValidationError("info_nce: temperature must be positive");

    InfoNceLoss out;
    out.grad_anchor.assign(anchor.size(), 0.0);
    out.grad_positives.assign(positives.size(), std::vector<double>(anchor.size(), 0.0));
    out.grad_negatives.assign(negatives.size(), std::vector<double>(anchor.size(), 0.0));

    std::vector<detail::CosineWithGrad> pos_sim, neg_sim;
    pos_sim.reserve(positives.size());
    neg_sim.reserve(negatives.size());
    for (const auto& p : positives) pos_sim.push_back(detail::cosine_with_grad(anchor, p));
    for (const auto& n : negatives) neg_sim.push_back(detail::cosine_with_grad(anchor, n));

    // d(loss)/d(similarity), accumulated across positives for the shared
    // negatives, then mapped back through the cosine.
    std::vector<double> dloss_dneg(negatives.size(), 0.0);
    std::vector<double> z(negatives.size() + 1);
    for (std::size_t p = 0; p < positives.size(); ++p) {
        z[0] = pos_sim[p].value / tau;
        for (std::size_t j = 0; j < negatives.size(); ++j) z[j + 1] = neg_sim[j].value / tau;
        double lse = log_sum_exp(z);
        out.value += lse - z[0];

        double w0 = std::exp(z[0] - lse);
        double dloss_dpos = (w0 - 1.0) / tau;
        for (std::size_t i = 0; i < anchor.size(); ++i) {
            out.grad_anchor[i] += dloss_dpos * pos_sim[p].grad_a[i];
            out.grad_positives[p][i] = dloss_dpos * pos_sim[p].grad_b[i];
        }
        for (std::size_t j = 0; j < negatives.size(); ++j)
            dloss_dneg[j] += std::exp(z[j + 1] - lse) / tau;
    }
    for (std::size_t j = 0; j < negatives.size(); ++j) {
        for (std::size_t i = 0; i < anchor.size(); ++i) {
            out.grad_anchor[i] += dloss_dneg[j] * neg_sim[j].grad_a[i];
            out.grad_negatives[j][i] = dloss_dneg[j] * neg_sim[j].grad_b[i];
        }
    }
    return out;
}

struct TotalLoss {
    double value = 0.0;
    double consistency_value = 0.0;
    double contrastive_value = 0.0;
    std::map<PerturbationLevel, Matrix> grad_logits;
    std::map<PerturbationLevel, Matrix> grad_hidden;
    std::vector<std::vector<double>> grad_negatives;
};

/// Joint objective: (contrastive + consistency) / 2. The anchor is the
/// pooled original hidden state, the positives are the pooled perturbed
/// hidden states, and the negatives are caller-supplied embeddings of
/// unrelated questions in the batch.
inline TotalLoss total_loss(const LossInput& input,
                            const std::vector<std::vector<double>>& batch_negatives) {
    validate(input);
    TotalLoss out;

    auto cons = consistency_loss(input);
    out.consistency_value = cons.value;

    std::vector<PerturbationLevel> positive_levels;
    for (auto level : perturbed_levels)
        if (input.hidden.count(level)) positive_levels.push_back(level);

    InfoNceLoss ctr;
    bool have_ctr = !positive_levels.empty();
    std::vector<double> anchor;
    if (have_ctr) {
        auto anchor_it = input.hidden.find(PerturbationLevel::Original);
        if (anchor_it == input.hidden.end())
            throw ValidationError("total_loss: perturbed hidden states present but original hidden state missing");
        anchor = mean_pool(anchor_it->second);
        std::vector<std::vector<double>> positives;
        positives.reserve(positive_levels.size());
        for (auto level : positive_levels) positives.push_back(mean_pool(input.hidden.at(level)));
        for (const auto& n : batch_negatives)
            if (n.size() != anchor.size())
                throw ValidationError("total_loss: negative embedding width does not match anchor");
        ctr = info_nce(anchor, positives, batch_negatives, input.temperature);
        out.contrastive_value = ctr.value;
    }

    out.value = 0.5 * (out.contrastive_value + out.consistency_value);

    for (auto& [level, grad] : cons.grad_logits) {
        for (double& g : grad.data) g *= 0.5;
        out.grad_logits[level] = std::move(grad);
    }

    // Hidden-state gradients chain through the mean pooling: every row of a
    // pooled matrix receives grad_pooled / L.
    auto spread_pooled_grad = [](const std::vector<double>& grad_pooled, const Matrix& hidden,
                                 double scale) {
        Matrix grad(hidden.rows, hidden.cols);
        double inv_rows = scale / static_cast<double>(hidden.rows);
        for (std::size_t r = 0; r < hidden.rows; ++r) {
            auto row = grad.row(r);
            for (std::size_t c = 0; c < hidden.cols; ++c) row[c] = grad_pooled[c] * inv_rows;
        }
        return grad;
    };

    for (const auto& [level, m] : input.hidden) out.grad_hidden[level] = Matrix(m.rows, m.cols);
    if (have_ctr) {
        out.grad_hidden[PerturbationLevel::Original] =
            spread_pooled_grad(ctr.grad_anchor, input.hidden.at(PerturbationLevel::Original), 0.5);
        for (std::size_t p = 0; p < positive_levels.size(); ++p)
            out.grad_hidden[positive_levels[p]] =
                spread_pooled_grad(ctr.grad_positives[p], input.hidden.at(positive_levels[p]), 0.5);
        out.grad_negatives = std::move(ctr.grad_negatives);
        for (auto& g : out.grad_negatives)
            for (double& v : g) v *= 0.5;
    } else {
        out.grad_negatives.assign(batch_negatives.size(),
                                  std::vector<double>(batch_negatives.empty() ? 0 : batch_negatives[0].size(), 0.0));
    }
    return out;
}

} // namespace cclkit
