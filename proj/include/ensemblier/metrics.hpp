#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ensemblier/errors.hpp"

namespace ensemblier::metrics {

/// C x C counts; entry (i, j) = samples with true class i predicted as j.
struct ConfusionMatrix {
    int n_classes = 0;
    std::vector<std::int64_t> counts;

    explicit ConfusionMatrix(int c = 0)
        : n_classes(c),
          counts(static_cast<std::size_t>(c) * static_cast<std::size_t>(c), 0) {}

    std::int64_t at(int truth, int predicted) const {
        return counts[static_cast<std::size_t>(truth) * static_cast<std::size_t>(n_classes) +
                      static_cast<std::size_t>(predicted)];
    }
    std::int64_t& at(int truth, int predicted) {
        return counts[static_cast<std::size_t>(truth) * static_cast<std::size_t>(n_classes) +
                      static_cast<std::size_t>(predicted)];
    }

    std::int64_t total() const {
        std::int64_t n = 0;
        for (auto v : counts) n += v;
        return n;
    }

    std::int64_t trace() const {
        std::int64_t t = 0;
        for (int c = 0; c < n_classes; ++c) t += at(c, c);
        return t;
    }
};

/// One-vs-all counts for a single class.
struct BinaryCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
};

inline ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                                 int n_classes) {
    if (predictions.size() != labels.size())
        throw ValidationError("confusion: " + std::to_string(predictions.size()) +
                              " predictions vs " + std::to_string(labels.size()) + " labels");
    ConfusionMatrix cm(n_classes);
    for (std::size_t t = 0; t < labels.size(); ++t) {
        if (labels[t] < 0 || labels[t] >= n_classes || predictions[t] < 0 ||
            predictions[t] >= n_classes)
            throw ValidationError("confusion: class index out of range at sample " +
                                  std::to_string(t));
        ++cm.at(labels[t], predictions[t]);
    }
    return cm;
}

inline BinaryCounts one_vs_all(const ConfusionMatrix& cm, int cls) {
    if (cls < 0 || cls >= cm.n_classes)
        throw ValidationError("one_vs_all: class " + std::to_string(cls) + " out of range");
    BinaryCounts b;
    b.tp = cm.at(cls, cls);
    for (int i = 0; i < cm.n_classes; ++i) {
        if (i == cls) continue;
        b.fp += cm.at(i, cls);
        b.fn += cm.at(cls, i);
    }
    b.tn = cm.total() - b.tp - b.fp - b.fn;
    return b;
}

/// Macro F-measure: per class the harmonic mean 2PR/(P+R) of one-vs-all
/// precision and recall, averaged over classes. Degenerate classes: never
/// present and never predicted scores 1 (vacuously perfect); present or
/// predicted but with no true positive scores 0.
inline double f_measure_macro(const ConfusionMatrix& cm) {
    double sum = 0.0;
    for (int c = 0; c < cm.n_classes; ++c) {
        const BinaryCounts b = one_vs_all(cm, c);
        double f;
        if (2 * b.tp + b.fp + b.fn == 0) {
            f = 1.0;
        } else if (b.tp == 0) {
            f = 0.0;
        } else {
            const double p = static_cast<double>(b.tp) / static_cast<double>(b.tp + b.fp);
            const double r = static_cast<double>(b.tp) / static_cast<double>(b.tp + b.fn);
            f = 2.0 * p * r / (p + r);
        }
        sum += f;
    }
    return sum / static_cast<double>(cm.n_classes);
}

/// Mean over classes of the one-vs-all binary accuracy (tp+tn)/n.
inline double accuracy_macro(const ConfusionMatrix& cm) {
    const std::int64_t n = cm.total();
    if (n == 0) throw ValidationError("accuracy_macro: empty confusion matrix");
    double sum = 0.0;
    for (int c = 0; c < cm.n_classes; ++c) {
        const BinaryCounts b = one_vs_all(cm, c);
        sum += static_cast<double>(b.tp + b.tn) / static_cast<double>(n);
    }
    return sum / static_cast<double>(cm.n_classes);
}

/// Fraction of correctly predicted samples, trace(cm)/n.
inline double accuracy_overall(const ConfusionMatrix& cm) {
    const std::int64_t n = cm.total();
    if (n == 0) throw ValidationError("accuracy_overall: empty confusion matrix");
    return static_cast<double>(cm.trace()) / static_cast<double>(n);
}

} // namespace ensemblier::metrics
