#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cclkit/errors.hpp"
#include "cclkit/losses.hpp"

namespace cclkit {

/// Central finite-difference check of an analytic gradient.
/// Returns max over coordinates of |analytic - numeric| / max(1, |numeric|).
inline double grad_check(const std::function<double(std::span<const double>)>& value_fn,
                         std::span<const double> point,
                         std::span<const double> analytic_grad,
                         double epsilon) {
    if (epsilon < 1e-7 || epsilon > 1e-3)
        throw ValidationError("grad_check: epsilon must lie in [1e-7, 1e-3]");
    if (point.size() != analytic_grad.size())
        throw ValidationError("grad_check: gradient length does not match point length");

    std::vector<double> x(point.begin(), point.end());
    double max_rel = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double saved = x[i];
        x[i] = saved + epsilon;
        double f_plus = value_fn(x);
        x[i] = saved - epsilon;
        double f_minus = value_fn(x);
        x[i] = saved;
        if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
            throw ValidationError("grad_check: non-finite loss at perturbed point, coordinate " +
                                  std::to_string(i));
        double numeric = (f_plus - f_minus) / (2.0 * epsilon);
        double rel = std::abs(analytic_grad[i] - numeric) / std::max(1.0, std::abs(numeric));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

// ---------------------------------------------------------------------------
// Randomized per-operation trial suites, shared by the unit tests and the
// gradcheck CLI command.

namespace gradcheck {

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                            double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (double& v : m.data) v = dist(rng);
    return m;
}

/// Embedding draws avoid tiny norms; the cosine direction is ill
/// conditioned near zero and finite differences lose accuracy there.
inline std::vector<double> random_embedding(std::mt19937_64& rng, std::size_t dim) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(dim);
    while (true) {
        for (double& x : v) x = dist(rng);
        if (norm(v) > 0.3) return v;
    }
}

inline std::vector<int> random_targets(std::mt19937_64& rng, std::size_t len, std::size_t vocab) {
    std::uniform_int_distribution<int> dist(0, static_cast<int>(vocab) - 1);
    std::vector<int> t(len);
    for (int& v : t) v = dist(rng);
    return t;
}

inline double check_ar_cross_entropy(std::mt19937_64& rng, double epsilon) {
    std::uniform_int_distribution<std::size_t> tdist(1, 4), vdist(3, 8);
    std::size_t T = tdist(rng), V = vdist(rng);
    Matrix logits = random_matrix(rng, T, V);
    auto targets = random_targets(rng, T, V);
    auto analytic = ar_cross_entropy(logits, targets);
    auto f = [&](std::span<const double> x) {
        Matrix m(T, V, std::vector<double>(x.begin(), x.end()));
        return ar_cross_entropy(m, targets).value;
    };
    return grad_check(f, logits.data, analytic.grad_logits.data, epsilon);
}

inline LossInput random_loss_input(std::mt19937_64& rng, bool with_hidden) {
    std::uniform_int_distribution<std::size_t> tdist(1, 3), vdist(3, 6), ldist(1, 4), ddist(2, 5);
    std::uniform_real_distribution<double> tau_dist(0.07, 1.5);
    std::bernoulli_distribution coin(0.75);
    std::size_t V = vdist(rng), D = ddist(rng);
    LossInput input;
    input.temperature = tau_dist(rng);
    for (auto level : all_levels) {
        bool present = level == PerturbationLevel::Original || coin(rng);
        if (!present) continue;
        std::size_t T = tdist(rng);
        input.logits[level] = random_matrix(rng, T, V);
        input.targets[level] = random_targets(rng, T, V);
        if (with_hidden) {
            std::size_t L = ldist(rng);
            Matrix h(L, D);
            for (std::size_t r = 0; r < L; ++r) {
                auto e = random_embedding(rng, D);
                std::copy(e.begin(), e.end(), h.row(r).begin());
            }
            input.hidden[level] = std::move(h);
        }
    }
    return input;
}

inline double check_consistency_loss(std::mt19937_64& rng, double epsilon) {
    LossInput input = random_loss_input(rng, false);
    auto analytic = consistency_loss(input);

    std::vector<PerturbationLevel> order;
    std::vector<double> flat;
    for (auto level : all_levels) {
        if (!input.logits.count(level)) continue;
        order.push_back(level);
        const auto& m = input.logits[level];
        flat.insert(flat.end(), m.data.begin(), m.data.end());
    }
    std::vector<double> analytic_flat;
    for (auto level : order) {
        const auto& g = analytic.grad_logits.at(level);
        analytic_flat.insert(analytic_flat.end(), g.data.begin(), g.data.end());
    }

    auto f = [&](std::span<const double> x) {
        LossInput probe = input;
        std::size_t offset = 0;
        for (auto level : order) {
            auto& m = probe.logits[level];
            std::copy(x.begin() + offset, x.begin() + offset + m.data.size(), m.data.begin());
            offset += m.data.size();
        }
        return consistency_loss(probe).value;
    };
    return grad_check(f, flat, analytic_flat, epsilon);
}

inline double check_info_nce(std::mt19937_64& rng, double epsilon) {
    std::uniform_int_distribution<std::size_t> pdist(1, 3), ndist(0, 4), ddist(2, 6);
    std::uniform_real_distribution<double> tau_dist(0.07, 1.5);
    std::size_t D = ddist(rng), P = pdist(rng), N = ndist(rng);
    double tau = tau_dist(rng);

    auto anchor = random_embedding(rng, D);
    std::vector<std::vector<double>> positives(P), negatives(N);
    for (auto& p : positives) p = random_embedding(rng, D);
    for (auto& n : negatives) n = random_embedding(rng, D);

    auto analytic = info_nce(anchor, positives, negatives, tau);

    std::vector<double> flat(anchor);
    for (const auto& p : positives) flat.insert(flat.end(), p.begin(), p.end());
    for (const auto& n : negatives) flat.insert(flat.end(), n.begin(), n.end());
    std::vector<double> analytic_flat(analytic.grad_anchor);
    for (const auto& g : analytic.grad_positives) analytic_flat.insert(analytic_flat.end(), g.begin(), g.end());
    for (const auto& g : analytic.grad_negatives) analytic_flat.insert(analytic_flat.end(), g.begin(), g.end());

    auto f = [&](std::span<const double> x) {
        std::size_t offset = 0;
        auto take = [&](std::size_t n) {
            std::vector<double> v(x.begin() + offset, x.begin() + offset + n);
            offset += n;
            return v;
        };
        auto a = take(D);
        std::vector<std::vector<double>> ps(P), ns(N);
        for (auto& p : ps) p = take(D);
        for (auto& n : ns) n = take(D);
        return info_nce(a, ps, ns, tau).value;
    };
    return grad_check(f, flat, analytic_flat, epsilon);
}

inline double check_total_loss(std::mt19937_64& rng, double epsilon) {
    LossInput input = random_loss_input(rng, true);
    std::uniform_int_distribution<std::size_t> ndist(0, 3);
    std::size_t D = input.hidden.at(PerturbationLevel::Original).cols;
    std::vector<std::vector<double>> negatives(ndist(rng));
    for (auto& n : negatives) n = random_embedding(rng, D);

    auto analytic = total_loss(input, negatives);

    std::vector<PerturbationLevel> logit_order, hidden_order;
    std::vector<double> flat, analytic_flat;
    for (auto level : all_levels) {
        if (input.logits.count(level)) logit_order.push_back(level);
        if (input.hidden.count(level)) hidden_order.push_back(level);
    }
    for (auto level : logit_order) {
        const auto& m = input.logits[level];
        flat.insert(flat.end(), m.data.begin(), m.data.end());
        const auto& g = analytic.grad_logits.at(level);
        analytic_flat.insert(analytic_flat.end(), g.data.begin(), g.data.end());
    }
    for (auto level : hidden_order) {
        const auto& m = input.hidden[level];
        flat.insert(flat.end(), m.data.begin(), m.data.end());
        const auto& g = analytic.grad_hidden.at(level);
        analytic_flat.insert(analytic_flat.end(), g.data.begin(), g.data.end());
    }
    for (const auto& n : negatives) flat.insert(flat.end(), n.begin(), n.end());
    for (const auto& g : analytic.grad_negatives) analytic_flat.insert(analytic_flat.end(), g.begin(), g.end());

    auto f = [&](std::span<const double> x) {
        LossInput probe = input;
        std::size_t offset = 0;
        for (auto level : logit_order) {
            auto& m = probe.logits[level];
            std::copy(x.begin() + offset, x.begin() + offset + m.data.size(), m.data.begin());
            offset += m.data.size();
        }
        for (auto level : hidden_order) {
            auto& m = probe.hidden[level];
            std::copy(x.begin() + offset, x.begin() + offset + m.data.size(), m.data.begin());
            offset += m.data.size();
        }
        std::vector<std::vector<double>> negs = negatives;
        for (auto& n : negs) {
            std::copy(x.begin() + offset, x.begin() + offset + n.size(), n.begin());
            offset += n.size();
        }
        return total_loss(probe, negs).value;
    };
    return grad_check(f, flat, analytic_flat, epsilon);
}

inline double check_cosine_sim(std::mt19937_64& rng, double epsilon) {
    std::uniform_int_distribution<std::size_t> ddist(2, 6);
    std::size_t D = ddist(rng);
    auto a = random_embedding(rng, D);
    auto b = random_embedding(rng, D);
    auto analytic = detail::cosine_with_grad(a, b);

    std::vector<double> flat(a);
    flat.insert(flat.end(), b.begin(), b.end());
    std::vector<double> analytic_flat(analytic.grad_a);
    analytic_flat.insert(analytic_flat.end(), analytic.grad_b.begin(), analytic.grad_b.end());

    auto f = [&](std::span<const double> x) {
        std::vector<double> xa(x.begin(), x.begin() + D), xb(x.begin() + D, x.end());
        return cosine_sim(xa, xb);
    };
    return grad_check(f, flat, analytic_flat, epsilon);
}

struct SuiteResult {
    std::string op;
    int trials = 0;
    double max_rel_error = 0.0;
};

/// Runs `trials` random instances per loss operation; each entry reports the
/// worst relative error seen for that operation.
inline std::vector<SuiteResult> run_suite(int trials, double epsilon, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    using CheckFn = double (*)(std::mt19937_64&, double);
    const std::pair<const char*, CheckFn> ops[] = {
        {"ar_cross_entropy", &check_ar_cross_entropy},
        {"consistency_loss", &check_consistency_loss},
        {"info_nce", &check_info_nce},
        {"total_loss", &check_total_loss},
        {"cosine_sim", &check_cosine_sim},
    };
    std::vector<SuiteResult> results;
    for (const auto& [name, fn] : ops) {
        SuiteResult r{name, trials, 0.0};
        for (int i = 0; i < trials; ++i) r.max_rel_error = std::max(r.max_rel_error, fn(rng, epsilon));
        results.push_back(std::move(r));
    }
    return results;
}

} // namespace gradcheck

} // namespace cclkit
