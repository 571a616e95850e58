#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ensemblier/errors.hpp"
#include "ensemblier/rng.hpp"

namespace ensemblier {

/// Split protocol of one dataset. Splitting is always unstratified: a seeded
/// uniform shuffle followed by contiguous slicing, so the class distribution
/// of train and test may drift apart.
struct ProtocolSpec {
    enum class Kind { HalfSplit, KFold };

    std::string dataset_id;
    int n_classes = 0;
    Kind kind = Kind::HalfSplit;
    int folds = 0; // KFold only
    bool stratified = false;

    static ProtocolSpec half_split(std::string dataset_id, int n_classes) {
        return {std::move(dataset_id), n_classes, Kind::HalfSplit, 0, false};
    }
    static ProtocolSpec k_fold(std::string dataset_id, int n_classes, int k) {
        return {std::move(dataset_id), n_classes, Kind::KFold, k, false};
    }

    int n_splits() const { return kind == Kind::HalfSplit ? 1 : folds; }
};

/// The five benchmark datasets with their published protocols.
inline const std::vector<ProtocolSpec>& dataset_registry() {
    static const std::vector<ProtocolSpec> registry{
        ProtocolSpec::half_split("WHOI", 22),
        ProtocolSpec::k_fold("ZooScan", 20, 2),
        ProtocolSpec::k_fold("Kaggle", 38, 5),
        ProtocolSpec::k_fold("EILAT", 8, 5),
        ProtocolSpec::k_fold("RSMAS", 14, 5),
    };
    return registry;
}

inline const ProtocolSpec* find_protocol(const std::string& dataset_id) {
    for (const auto& p : dataset_registry())
        if (p.dataset_id == dataset_id) return &p;
    return nullptr;
}

struct SplitPair {
    std::string split_id; // "half" or "foldK"
    std::vector<int> train;
    std::vector<int> test;
};

/// Seeded unstratified partition of 0..n_samples-1. HalfSplit puts the first
/// ceil(N/2) shuffled indices in train; KFold(k) slices k contiguous test
/// folds whose sizes differ by at most one.
inline std::vector<SplitPair> make_splits(int n_samples, const ProtocolSpec& spec,
                                          std::uint64_t seed) {
    if (n_samples < 1) throw ProtocolError("make_splits: need at least 1 sample");
    if (spec.kind == ProtocolSpec::Kind::KFold && n_samples < spec.folds)
        throw ProtocolError("make_splits: " + std::to_string(n_samples) + " samples < " +
                            std::to_string(spec.folds) + " folds for '" + spec.dataset_id + "'");

    std::vector<int> order(static_cast<std::size_t>(n_samples));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, std::string_view("splits"), fnv1a(spec.dataset_id)));
    rng.shuffle(order);

    std::vector<SplitPair> out;
    if (spec.kind == ProtocolSpec::Kind::HalfSplit) {
        SplitPair p;
        p.split_id = "half";
        const std::size_t n_train = (static_cast<std::size_t>(n_samples) + 1) / 2;
        p.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        p.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
        out.push_back(std::move(p));
    } else {
        const auto n = static_cast<std::size_t>(n_samples);
        const auto k = static_cast<std::size_t>(spec.folds);
        for (std::size_t f = 0; f < k; ++f) {
            SplitPair p;
            p.split_id = "fold" + std::to_string(f);
            const std::size_t lo = f * n / k;
            const std::size_t hi = (f + 1) * n / k;
            p.test.assign(order.begin() + static_cast<std::ptrdiff_t>(lo),
                          order.begin() + static_cast<std::ptrdiff_t>(hi));
            p.train.reserve(n - (hi - lo));
            p.train.insert(p.train.end(), order.begin(),
                           order.begin() + static_cast<std::ptrdiff_t>(lo));
            p.train.insert(p.train.end(), order.begin() + static_cast<std::ptrdiff_t>(hi),
                           order.end());
            out.push_back(std::move(p));
        }
    }
    return out;
}

} // namespace ensemblier
