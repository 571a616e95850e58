#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ensemblier/errors.hpp"
#include "ensemblier/rng.hpp"
#include "ensemblier/selection.hpp"
#include "ensemblier/types.hpp"

// Weighted selection: learn one weight per classifier on the probability
// simplex by minimizing crossentropy of the weighted score average plus the
// sparsity term reg * sum_i w_i^gamma with gamma < 1, then zero out small
// weights. Weights are parameterized as w = softmax(theta) so plain SGD steps
// on theta keep the iterate on the simplex.

namespace ensemblier::ws {

inline constexpr double kCrossentropyFloor = 1e-12;

struct WeightVector {
    std::vector<double> w;

    void validate() const {
        double sum = 0.0;
        for (double v : w) {
            if (!(v >= 0.0))
                throw ValidationError("weight vector has a negative or non-finite entry");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError("weight vector sums to " + std::to_string(sum) +
                                  ", expected 1");
    }

    static WeightVector uniform(std::size_t n) {
        if (n == 0) throw ValidationError("weight vector needs at least 1 entry");
        return {std::vector<double>(n, 1.0 / static_cast<double>(n))};
    }
};

struct WsConfig {
    double gamma = 0.5;            // sparsity exponent, strictly < 1
    double reg_coefficient = 0.1;  // weight of the sum w^gamma term
    double learning_rate = 0.05;
    int epochs = 200;
    int batch_size = 64;
    std::uint64_t seed = 1;
    double zero_threshold = 0.0;   // 0 resolves to 1/(4n) at selection time

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0))
            throw ValidationError("ws: gamma must lie in (0, 1), got " + std::to_string(gamma));
        if (reg_coefficient < 0.0) throw ValidationError("ws: reg_coefficient must be >= 0");
        if (epochs < 1 || batch_size < 1) throw ValidationError("ws: epochs and batch_size >= 1");
        if (zero_threshold < 0.0 || zero_threshold >= 1.0)
            throw ValidationError("ws: zero_threshold must lie in [0, 1)");
    }
};

namespace detail {

inline void check_weights(const WeightVector& w, std::size_t n) {
    if (w.w.size() != n)
        throw ValidationError("ws: " + std::to_string(w.w.size()) + " weights for " +
                              std::to_string(n) + " members");
    w.validate();
}

/// Fused probability of the true class per sample, accumulated block-wise.
template <typename Fn>
void for_each_true_class_prob(const selection::CandidateSet& set, std::span<const double> w,
                              Fn&& fn) {
    for (std::size_t bi = 0; bi < set.blocks.size(); ++bi) {
        const auto& block = set.blocks[bi];
        const auto c_count = static_cast<std::size_t>(block.n_classes);
        for (std::size_t t = 0; t < block.labels.size(); ++t) {
            const std::size_t offset = t * c_count + static_cast<std::size_t>(block.labels[t]);
            double p = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) p += w[i] * block.scores[i][offset];
            fn(bi, t, p);
        }
    }
}

inline std::size_t total_samples(const selection::CandidateSet& set) {
    std::size_t n = 0;
    for (const auto& block : set.blocks) n += block.labels.size();
    return n;
}

inline std::vector<double> softmax(std::span<const double> theta) {
    const double m = *std::max_element(theta.begin(), theta.end());
    std::vector<double> w(theta.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        w[i] = std::exp(theta[i] - m);
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

} // namespace detail

/// L(w) = -(1/N) sum_t log(max(eps, [sum_i w_i s_i]_{t, label_t}))
///        + reg * sum_i w_i^gamma
inline double loss(const WeightVector& w, const selection::CandidateSet& set,
                   const WsConfig& cfg) {
    cfg.validate();
    set.validate();
    detail::check_weights(w, set.n_candidates());

    double ce = 0.0;
    detail::for_each_true_class_prob(set, w.w, [&](std::size_t, std::size_t, double p) {
        ce -= std::log(std::max(kCrossentropyFloor, p));
    });
    ce /= static_cast<double>(detail::total_samples(set));

    double reg = 0.0;
    for (double v : w.w) reg += std::pow(v, cfg.gamma);
    return ce + cfg.reg_coefficient * reg;
}

/// Convenience overload on aligned member matrices.
inline double loss(const WeightVector& w, std::span<const ScoreMatrix> members,
                   const WsConfig& cfg) {
    return loss(w, selection::CandidateSet::from_matrices(members), cfg);
}

/// Analytic gradient of `loss` with respect to the softmax logits theta of
/// w = softmax(theta): d/dtheta_j = w_j (g_j - <w, g>) where g is the
/// gradient in w. Requires strictly positive weights (the regularizer term
/// gamma * w^(gamma-1) is singular at 0).
inline std::vector<double> gradient(const WeightVector& w, const selection::CandidateSet& set,
                                    const WsConfig& cfg) {
    cfg.validate();
    set.validate();
    detail::check_weights(w, set.n_candidates());
    const std::size_t n = w.w.size();
    for (double v : w.w)
        if (v == 0.0)
            throw ValidationError("ws gradient: zero weight makes the regularizer gradient "
                                  "singular");

    std::vector<double> grad_w(n, 0.0);
    detail::for_each_true_class_prob(set, w.w, [&](std::size_t bi, std::size_t t, double p) {
        if (p <= kCrossentropyFloor) return; // flat region of the floored log
        const auto& block = set.blocks[bi];
        const std::size_t offset = t * static_cast<std::size_t>(block.n_classes) +
                                   static_cast<std::size_t>(block.labels[t]);
        for (std::size_t i = 0; i < n; ++i) grad_w[i] -= block.scores[i][offset] / p;
    });
    const double inv_n = 1.0 / static_cast<double>(detail::total_samples(set));
    for (std::size_t i = 0; i < n; ++i) {
        grad_w[i] *= inv_n;
        grad_w[i] += cfg.reg_coefficient * cfg.gamma * std::pow(w.w[i], cfg.gamma - 1.0);
    }

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += w.w[i] * grad_w[i];
    std::vector<double> grad_theta(n);
    for (std::size_t i = 0; i < n; ++i) grad_theta[i] = w.w[i] * (grad_w[i] - mean);
    return grad_theta;
}

inline std::vector<double> gradient(const WeightVector& w, std::span<const ScoreMatrix> members,
                                    const WsConfig& cfg) {
    return gradient(w, selection::CandidateSet::from_matrices(members), cfg);
}

struct OptimizeResult {
    WeightVector weights;
    std::vector<double> epoch_loss; // full loss after each epoch
};

/// Per-epoch observer; epoch is 1-based. Used by tests to watch the iterate.
using OptimizeObserver = std::function<void(int epoch, const WeightVector&, double loss)>;

/// Minibatch SGD on softmax-parameterized weights. The sample space pools all
/// blocks; batches are reshuffled every epoch from the config seed. Throws
/// DivergenceError when the loss leaves the finite range.
inline OptimizeResult optimize(const selection::CandidateSet& set, const WsConfig& cfg,
                               const OptimizeObserver& observer = {}) {
    cfg.validate();
    set.validate();
    const std::size_t n = set.n_candidates();

    // Global sample index -> (block, row).
    std::vector<std::pair<std::uint32_t, std::uint32_t>> samples;
    samples.reserve(detail::total_samples(set));
    for (std::size_t bi = 0; bi < set.blocks.size(); ++bi)
        for (std::size_t t = 0; t < set.blocks[bi].labels.size(); ++t)
            samples.emplace_back(static_cast<std::uint32_t>(bi), static_cast<std::uint32_t>(t));

    // Small seeded init breaks ties between otherwise symmetric members.
    std::vector<double> theta(n);
    {
        Rng rng(mix_seed(cfg.seed, std::string_view("ws-init")));
        for (auto& v : theta) v = 0.01 * rng.next_gaussian();
    }
    std::vector<double> w = detail::softmax(theta);

    OptimizeResult result;
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad_w(n), grad_theta(n);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(mix_seed(cfg.seed, std::string_view("ws-epoch"),
                         static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);

        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::fill(grad_w.begin(), grad_w.end(), 0.0);
            for (std::size_t s = start; s < stop; ++s) {
                const auto [bi, t] = samples[order[s]];
                const auto& block = set.blocks[bi];
                const std::size_t offset = static_cast<std::size_t>(t) *
                                               static_cast<std::size_t>(block.n_classes) +
                                           static_cast<std::size_t>(block.labels[t]);
                double p = 0.0;
                for (std::size_t i = 0; i < n; ++i) p += w[i] * block.scores[i][offset];
                if (p <= kCrossentropyFloor) continue;
                for (std::size_t i = 0; i < n; ++i) grad_w[i] -= block.scores[i][offset] / p;
            }
            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            for (std::size_t i = 0; i < n; ++i) {
                grad_w[i] *= inv_batch;
                grad_w[i] +=
                    cfg.reg_coefficient * cfg.gamma * std::pow(w[i], cfg.gamma - 1.0);
            }
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += w[i] * grad_w[i];
            for (std::size_t i = 0; i < n; ++i) {
                grad_theta[i] = w[i] * (grad_w[i] - mean);
                theta[i] -= cfg.learning_rate * grad_theta[i];
            }
            w = detail::softmax(theta);
        }

        if (!std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); }))
            throw DivergenceError("ws optimize diverged at epoch " + std::to_string(epoch) +
                                  "; try a smaller learning_rate");
        const double epoch_loss = loss(WeightVector{w}, set, cfg);
        if (!std::isfinite(epoch_loss))
            throw DivergenceError("ws optimize diverged at epoch " + std::to_string(epoch) +
                                  "; try a smaller learning_rate");
        result.epoch_loss.push_back(epoch_loss);
        if (observer) observer(epoch, WeightVector{w}, epoch_loss);
    }
    result.weights = WeightVector{std::move(w)};
    return result;
}

inline OptimizeResult optimize(std::span<const ScoreMatrix> members, const WsConfig& cfg,
                               const OptimizeObserver& observer = {}) {
    return optimize(selection::CandidateSet::from_matrices(members), cfg, observer);
}

struct Selection {
    WeightVector weights;          // sparse, renormalized to sum 1
    std::vector<std::size_t> kept; // indices of surviving members
};

/// Zero every weight below the threshold (default 1/(4n)) and renormalize the
/// survivors. Throws when nothing survives.
inline Selection select(const WeightVector& w, double zero_threshold = 0.0) {
    w.validate();
    const std::size_t n = w.w.size();
    const double threshold = zero_threshold > 0.0 ? zero_threshold
                                                  : 1.0 / (4.0 * static_cast<double>(n));
    Selection sel;
    sel.weights.w.assign(n, 0.0);
    double kept_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (w.w[i] >= threshold) {
            sel.kept.push_back(i);
            kept_sum += w.w[i];
        }
    }
    if (sel.kept.empty())
        throw ValidationError("ws select: every weight is below threshold " +
                              std::to_string(threshold));
    for (auto i : sel.kept) sel.weights.w[i] = w.w[i] / kept_sum;
    return sel;
}

/// Keep exactly the top_k largest weights (ties to the lower index).
inline Selection select_top_k(const WeightVector& w, std::size_t top_k) {
    w.validate();
    const std::size_t n = w.w.size();
    if (top_k < 1 || top_k > n)
        throw ValidationError("ws select: top_k " + std::to_string(top_k) + " out of range");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return w.w[a] > w.w[b]; });
    order.resize(top_k);
    std::sort(order.begin(), order.end());

    Selection sel;
    sel.weights.w.assign(n, 0.0);
    sel.kept = order;
    double kept_sum = 0.0;
    for (auto i : sel.kept) kept_sum += w.w[i];
    if (kept_sum <= 0.0) throw ValidationError("ws select: top_k weights sum to zero");
    for (auto i : sel.kept) sel.weights.w[i] = w.w[i] / kept_sum;
    return sel;
}

/// Selector for the leave-one-out-dataset protocol: optimize, sparsify,
/// return the surviving ids with their renormalized weights.
inline selection::SelectorFn selector(WsConfig cfg, std::size_t top_k = 0) {
    return [cfg, top_k](const selection::CandidateSet& set) {
        const OptimizeResult opt = optimize(set, cfg);
        const Selection sel = top_k > 0 ? select_top_k(opt.weights, top_k)
                                        : select(opt.weights, cfg.zero_threshold);
        std::vector<std::string> ids;
        std::vector<double> weights;
        for (auto i : sel.kept) {
            ids.push_back(set.ids[i]);
            weights.push_back(sel.weights.w[i]);
        }
        return std::make_pair(ids, weights);
    };
}

} // namespace ensemblier::ws
