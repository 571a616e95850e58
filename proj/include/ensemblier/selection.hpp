#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ensemblier/errors.hpp"
#include "ensemblier/fusion.hpp"
#include "ensemblier/manifest.hpp"
#include "ensemblier/metrics.hpp"
#include "ensemblier/types.hpp"

namespace ensemblier::selection {

enum class Objective { AccuracyOverall, FMacro };

inline std::string to_string(Objective o) {
    return o == Objective::AccuracyOverall ? "accuracy" : "fmacro";
}

inline Objective parse_objective(const std::string& s) {
    if (s == "accuracy") return Objective::AccuracyOverall;
    if (s == "fmacro") return Objective::FMacro;
    throw FormatError("unknown objective '" + s + "'");
}

struct SelectionConfig {
    int k_target = 1;
    Objective objective = Objective::AccuracyOverall;
};

/// Aligned candidate scores on one dataset: `scores[i]` is candidate i's
/// flattened N x C matrix over this block's samples.
struct DatasetBlock {
    std::string dataset_id;
    int n_classes = 0;
    std::vector<std::string> sample_ids;
    std::vector<int> labels;
    std::vector<std::vector<double>> scores;
};

/// Candidate pool shared across one or more dataset blocks. Candidate i has
/// id `ids[i]` and one score matrix per block.
struct CandidateSet {
    std::vector<std::string> ids;
    std::vector<DatasetBlock> blocks;

    std::size_t n_candidates() const { return ids.size(); }

    void validate() const {
        if (ids.empty()) throw ValidationError("candidate set is empty");
        if (blocks.empty()) throw ValidationError("candidate set has no dataset blocks");
        std::set<std::string> unique(ids.begin(), ids.end());
        if (unique.size() != ids.size())
            throw ValidationError("candidate set has duplicate classifier ids");
        for (const auto& b : blocks) {
            if (b.scores.size() != ids.size())
                throw ValidationError("block '" + b.dataset_id + "' has " +
                                      std::to_string(b.scores.size()) + " score matrices for " +
                                      std::to_string(ids.size()) + " candidates");
            const std::size_t expect =
                b.labels.size() * static_cast<std::size_t>(b.n_classes);
            for (std::size_t i = 0; i < b.scores.size(); ++i)
                if (b.scores[i].size() != expect)
                    throw ValidationError("block '" + b.dataset_id + "' candidate '" + ids[i] +
                                          "' scores are misaligned");
        }
    }

    /// Single-block set from aligned per-candidate matrices.
    static CandidateSet from_matrices(std::span<const ScoreMatrix> candidates) {
        if (candidates.empty()) throw ValidationError("candidate set is empty");
        CandidateSet set;
        DatasetBlock block;
        block.dataset_id = candidates[0].dataset_id;
        block.n_classes = candidates[0].n_classes;
        block.sample_ids = candidates[0].sample_ids;
        block.labels = candidates[0].labels;
        for (const auto& sm : candidates) {
            if (!candidates[0].aligned_with(sm))
                throw ValidationError("candidate '" + sm.classifier_id +
                                      "' is not aligned with '" + candidates[0].classifier_id +
                                      "'");
            set.ids.push_back(sm.classifier_id);
            block.scores.push_back(sm.scores);
        }
        set.blocks.push_back(std::move(block));
        set.validate();
        return set;
    }
};

namespace detail {

/// Indices of `ids` in lexicographic id order (the documented tie-break and
/// canonical summation order).
inline std::vector<int> id_order(const std::vector<std::string>& ids) {
    std::vector<int> order(ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return ids[a] < ids[b]; });
    return order;
}

inline double block_objective(const DatasetBlock& block, std::span<const int> preds,
                              Objective obj) {
    const auto cm = metrics::confusion(preds, block.labels, block.n_classes);
    return obj == Objective::AccuracyOverall ? metrics::accuracy_overall(cm)
                                             : metrics::f_measure_macro(cm);
}

} // namespace detail

/// Objective of the sum-rule fusion of a candidate subset, evaluated in
/// canonical id-sorted summation order. Multi-block sets pool samples for the
/// accuracy objective and average per-block values for the macro F objective.
class SubsetEvaluator {
public:
    SubsetEvaluator(const CandidateSet& set, Objective objective)
        : set_(&set), objective_(objective) {
        set.validate();
        fused_.resize(set.blocks.size());
    }

    /// Canonical fresh evaluation of an arbitrary subset (candidate indices).
    double evaluate(std::span<const int> subset) const {
        if (subset.empty()) throw ValidationError("cannot evaluate an empty subset");
        std::vector<int> members(subset.begin(), subset.end());
        std::stable_sort(members.begin(), members.end(),
                         [&](int a, int b) { return set_->ids[static_cast<std::size_t>(a)] <
                                                    set_->ids[static_cast<std::size_t>(b)]; });
        double pooled_correct = 0.0, pooled_total = 0.0, obj_sum = 0.0;
        std::vector<double> fused;
        std::vector<int> preds;
        for (const auto& block : set_->blocks) {
            fused.assign(block.labels.size() * static_cast<std::size_t>(block.n_classes), 0.0);
            for (int m : members) {
                const auto& src = block.scores[static_cast<std::size_t>(m)];
                for (std::size_t k = 0; k < fused.size(); ++k) fused[k] += src[k];
            }
            predict_into(block, fused, preds);
            accumulate(block, preds, pooled_correct, pooled_total, obj_sum);
        }
        return finish(pooled_correct, pooled_total, obj_sum);
    }

    /// Commit a subset as the incremental base (recomputed canonically).
    void set_current(std::span<const int> subset) {
        current_.assign(subset.begin(), subset.end());
        std::stable_sort(current_.begin(), current_.end(),
                         [&](int a, int b) { return set_->ids[static_cast<std::size_t>(a)] <
                                                    set_->ids[static_cast<std::size_t>(b)]; });
        for (std::size_t bi = 0; bi < set_->blocks.size(); ++bi) {
            const auto& block = set_->blocks[bi];
            fused_[bi].assign(block.labels.size() * static_cast<std::size_t>(block.n_classes),
                              0.0);
            for (int m : current_) {
                const auto& src = block.scores[static_cast<std::size_t>(m)];
                for (std::size_t k = 0; k < fused_[bi].size(); ++k) fused_[bi][k] += src[k];
            }
        }
    }

    /// Fast guide value for current + candidate (not canonical order).
    double guide_with(int candidate) const { return guide(candidate, +1.0); }

    /// Fast guide value for current - member (subtraction, not canonical).
    double guide_without(int member) const { return guide(member, -1.0); }

private:
    double guide(int candidate, double sign) const {
        double pooled_correct = 0.0, pooled_total = 0.0, obj_sum = 0.0;
        std::vector<double> fused;
        std::vector<int> preds;
        for (std::size_t bi = 0; bi < set_->blocks.size(); ++bi) {
            const auto& block = set_->blocks[bi];
            const auto& src = block.scores[static_cast<std::size_t>(candidate)];
            fused = fused_[bi];
            for (std::size_t k = 0; k < fused.size(); ++k) fused[k] += sign * src[k];
            predict_into(block, fused, preds);
            accumulate(block, preds, pooled_correct, pooled_total, obj_sum);
        }
        return finish(pooled_correct, pooled_total, obj_sum);
    }

    static void predict_into(const DatasetBlock& block, const std::vector<double>& fused,
                             std::vector<int>& preds) {
        const auto c_count = static_cast<std::size_t>(block.n_classes);
        preds.resize(block.labels.size());
        for (std::size_t t = 0; t < block.labels.size(); ++t) {
            const double* row = fused.data() + t * c_count;
            int best = 0;
            for (std::size_t c = 1; c < c_count; ++c)
                if (row[c] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
            preds[t] = best;
        }
    }

    void accumulate(const DatasetBlock& block, const std::vector<int>& preds,
                    double& pooled_correct, double& pooled_total, double& obj_sum) const {
        if (objective_ == Objective::AccuracyOverall) {
            for (std::size_t t = 0; t < preds.size(); ++t)
                if (preds[t] == block.labels[t]) pooled_correct += 1.0;
            pooled_total += static_cast<double>(preds.size());
        } else {
            obj_sum += detail::block_objective(block, preds, objective_);
        }
    }

    double finish(double pooled_correct, double pooled_total, double obj_sum) const {
        if (objective_ == Objective::AccuracyOverall) {
            if (pooled_total == 0.0) throw ValidationError("subset objective over 0 samples");
            return pooled_correct / pooled_total;
        }
        return obj_sum / static_cast<double>(set_->blocks.size());
    }

    const CandidateSet* set_;
    Objective objective_;
    std::vector<int> current_;
    std::vector<std::vector<double>> fused_; // per block, canonical sum of current_
};

struct SffsStep {
    enum class Kind { Add, Remove };
    Kind kind;
    std::string id;
    int size_after = 0;
    double objective = 0.0;
};

struct SizeRecord {
    std::vector<std::string> ids; // id-sorted
    double objective = 0.0;
};

struct SffsResult {
    std::vector<std::string> selected; // best subset of size <= k_target
    double objective = 0.0;
    std::map<int, SizeRecord> best_by_size; // best subset found at each exact size
    std::vector<SffsStep> trace;
};

/// Sequential forward floating selection over sum-rule fusion.
///
/// Each cycle greedily adds the candidate that maximizes the fused objective,
/// then repeatedly removes the least useful member while doing so strictly
/// beats the best subset recorded at the smaller size (strict improvement
/// prevents add/remove oscillation). The search keeps floating past k_target
/// and stops once a full cycle at size >= k_target improves no record; the
/// returned selection is the best subset of size at most k_target, and
/// best_by_size holds the best subset found at every exact size. Ties break
/// to the lexicographically smallest classifier id.
inline SffsResult sffs(const CandidateSet& set, const SelectionConfig& cfg) {
    set.validate();
    const int n = static_cast<int>(set.n_candidates());
    if (cfg.k_target < 1)
        throw ValidationError("sffs: k_target must be >= 1, got " + std::to_string(cfg.k_target));
    if (cfg.k_target > n)
        throw ValidationError("sffs: k_target " + std::to_string(cfg.k_target) + " > " +
                              std::to_string(n) + " candidates");

    SubsetEvaluator evaluator(set, cfg.objective);
    const std::vector<int> order = detail::id_order(set.ids);

    std::vector<int> selected;          // current SS (candidate indices)
    std::vector<char> in_selected(static_cast<std::size_t>(n), 0);
    SffsResult result;

    auto record = [&](double objective) -> bool {
        const int size = static_cast<int>(selected.size());
        auto it = result.best_by_size.find(size);
        if (it != result.best_by_size.end() && objective <= it->second.objective) return false;
        SizeRecord rec;
        for (int i : order)
            if (in_selected[static_cast<std::size_t>(i)])
                rec.ids.push_back(set.ids[static_cast<std::size_t>(i)]);
        rec.objective = objective;
        result.best_by_size[size] = std::move(rec);
        return true;
    };

    evaluator.set_current(selected);
    for (;;) {
        bool improved = false;

        // Forward: add the candidate whose fused subset scores best.
        int added = -1;
        double guide_best = 0.0;
        for (int i : order) {
            if (in_selected[static_cast<std::size_t>(i)]) continue;
            const double g = evaluator.guide_with(i);
            if (added < 0 || g > guide_best) {
                added = i;
                guide_best = g;
            }
        }
        if (added < 0) break; // every candidate selected
        selected.push_back(added);
        in_selected[static_cast<std::size_t>(added)] = 1;
        evaluator.set_current(selected);
        const double add_objective = evaluator.evaluate(selected);
        result.trace.push_back({SffsStep::Kind::Add, set.ids[static_cast<std::size_t>(added)],
                                static_cast<int>(selected.size()), add_objective});
        improved = record(add_objective) || improved;

        // Backward: drop the worst member while that strictly beats the best
        // recorded subset one size down.
        while (selected.size() >= 2) {
            int worst = -1;
            double worst_guide = 0.0;
            for (int i : order) {
                if (!in_selected[static_cast<std::size_t>(i)]) continue;
                const double g = evaluator.guide_without(i);
                if (worst < 0 || g > worst_guide) {
                    worst = i;
                    worst_guide = g;
                }
            }
            std::vector<int> reduced;
            reduced.reserve(selected.size() - 1);
            for (int i : selected)
                if (i != worst) reduced.push_back(i);
            const double reduced_objective = evaluator.evaluate(reduced);
            const auto prev = result.best_by_size.find(static_cast<int>(reduced.size()));
            if (prev == result.best_by_size.end() ||
                reduced_objective > prev->second.objective) {
                in_selected[static_cast<std::size_t>(worst)] = 0;
                selected = std::move(reduced);
                evaluator.set_current(selected);
                result.trace.push_back({SffsStep::Kind::Remove,
                                        set.ids[static_cast<std::size_t>(worst)],
                                        static_cast<int>(selected.size()), reduced_objective});
                record(reduced_objective);
                improved = true;
            } else {
                break;
            }
        }

        if (static_cast<int>(selected.size()) >= cfg.k_target && !improved) break;
    }

    // Selection = best recorded subset of size <= k_target (smallest size on
    // objective ties).
    const SizeRecord* best = nullptr;
    for (const auto& [size, rec] : result.best_by_size) {
        if (size > cfg.k_target) continue;
        if (!best || rec.objective > best->objective) best = &rec;
    }
    if (!best) throw Error("sffs: no subset recorded"); // unreachable: forward always runs once
    result.selected = best->ids;
    result.objective = best->objective;
    return result;
}

/// Convenience overload for aligned candidate matrices on one dataset.
inline SffsResult sffs(std::span<const ScoreMatrix> candidates, const SelectionConfig& cfg) {
    return sffs(CandidateSet::from_matrices(candidates), cfg);
}

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        result = result * (n - k + i) / i;
        if (result > cap) return cap + 1;
    }
    return result;
}

/// Best subset of exactly k candidates by full enumeration; the independent
/// reference for the floating search. Ties break to the lexicographically
/// smallest id tuple.
inline SizeRecord exhaustive_best(const CandidateSet& set, int k, Objective objective,
                                  std::uint64_t budget = 1'000'000) {
    set.validate();
    const int n = static_cast<int>(set.n_candidates());
    if (k < 1 || k > n)
        throw ValidationError("exhaustive_best: k " + std::to_string(k) + " out of range");
    if (binomial(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k), budget) > budget)
        throw BudgetError("exhaustive_best: C(" + std::to_string(n) + ", " + std::to_string(k) +
                          ") exceeds budget " + std::to_string(budget));

    SubsetEvaluator evaluator(set, objective);
    const std::vector<int> order = detail::id_order(set.ids);

    std::vector<int> pick(static_cast<std::size_t>(k));
    std::iota(pick.begin(), pick.end(), 0);
    SizeRecord best;
    bool have = false;
    std::vector<int> subset(static_cast<std::size_t>(k));
    for (;;) {
        for (int i = 0; i < k; ++i)
            subset[static_cast<std::size_t>(i)] =
                order[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])];
        const double obj = evaluator.evaluate(subset);
        if (!have || obj > best.objective) {
            have = true;
            best.objective = obj;
            best.ids.clear();
            for (int i : subset) best.ids.push_back(set.ids[static_cast<std::size_t>(i)]);
            std::sort(best.ids.begin(), best.ids.end());
        }
        // next combination in lexicographic order
        int pos = k - 1;
        while (pos >= 0 && pick[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
        if (pos < 0) break;
        ++pick[static_cast<std::size_t>(pos)];
        for (int i = pos + 1; i < k; ++i)
            pick[static_cast<std::size_t>(i)] = pick[static_cast<std::size_t>(i - 1)] + 1;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Leave-one-out-dataset protocol
// ---------------------------------------------------------------------------

/// A selector maps held-in candidates to (subset ids, fusion weights).
using SelectorFn = std::function<std::pair<std::vector<std::string>, std::vector<double>>(
    const CandidateSet&)>;

inline SelectorFn sffs_selector(SelectionConfig cfg) {
    return [cfg](const CandidateSet& set) {
        const SffsResult r = sffs(set, cfg);
        return std::make_pair(r.selected, std::vector<double>(r.selected.size(), 1.0));
    };
}

/// Per-candidate view of one dataset: test splits pooled into one block.
/// Throws CoverageError when a classifier is missing a (dataset, split) pair.
inline CandidateSet assemble_candidates(const Zoo& zoo,
                                        const std::vector<std::string>& dataset_ids,
                                        fusion::Normalization norm) {
    if (dataset_ids.empty()) throw ValidationError("assemble_candidates: no datasets");

    // Candidate ids = classifiers present anywhere in the requested datasets;
    // coverage of every (dataset, split) is enforced below.
    std::set<std::string> id_set;
    std::map<std::string, std::set<std::string>> splits_by_dataset;
    for (const auto& e : zoo.manifest().entries) {
        if (std::find(dataset_ids.begin(), dataset_ids.end(), e.dataset_id) ==
            dataset_ids.end())
            continue;
        id_set.insert(e.record.classifier_id);
        splits_by_dataset[e.dataset_id].insert(e.split_id);
    }
    if (id_set.empty()) throw ValidationError("assemble_candidates: no zoo entries match");
    for (const auto& d : dataset_ids)
        if (!splits_by_dataset.count(d))
            throw ValidationError("assemble_candidates: dataset '" + d + "' has no entries");

    CandidateSet set;
    set.ids.assign(id_set.begin(), id_set.end()); // sorted by construction

    for (const auto& d : dataset_ids) {
        DatasetBlock block;
        block.dataset_id = d;
        block.scores.resize(set.ids.size());
        bool first_member = true;
        for (const auto& split : splits_by_dataset[d]) {
            std::vector<ScoreMatrix> loaded(set.ids.size());
            for (std::size_t i = 0; i < set.ids.size(); ++i) {
                auto entries = zoo.select([&](const ManifestEntry& e) {
                    return e.record.classifier_id == set.ids[i] && e.dataset_id == d &&
                           e.split_id == split;
                });
                if (entries.empty())
                    throw CoverageError("classifier '" + set.ids[i] +
                                        "' has no scores for (" + d + ", " + split + ")");
                loaded[i] = fusion::normalize_rows(zoo.load(*entries.front()), norm);
                if (!loaded[0].aligned_with(loaded[i]))
                    throw ValidationError("zoo entries for (" + d + ", " + split +
                                          ") are not sample-aligned");
            }
            if (first_member) {
                block.n_classes = loaded[0].n_classes;
                first_member = false;
            }
            block.sample_ids.insert(block.sample_ids.end(), loaded[0].sample_ids.begin(),
                                    loaded[0].sample_ids.end());
            block.labels.insert(block.labels.end(), loaded[0].labels.begin(),
                                loaded[0].labels.end());
            for (std::size_t i = 0; i < set.ids.size(); ++i)
                block.scores[i].insert(block.scores[i].end(), loaded[i].scores.begin(),
                                       loaded[i].scores.end());
        }
        set.blocks.push_back(std::move(block));
    }
    set.validate();
    return set;
}

struct LooPerDataset {
    std::string held_out;
    std::vector<std::string> subset;
    std::vector<double> weights; // parallel to subset
    double accuracy = 0.0;       // accuracy_overall on the held-out dataset
    std::vector<std::string> sample_ids;
    std::vector<int> labels;
    std::vector<int> predictions;
};

struct LooResult {
    std::vector<LooPerDataset> per_dataset;
    double avg_accuracy = 0.0;
};

/// For each dataset: select an ensemble on the remaining datasets' pooled
/// test scores, fuse the selection on the held-out dataset, predict by argmax
/// and score overall accuracy. Returns the per-dataset reports and their mean.
inline LooResult loo_protocol(const Zoo& zoo, const std::vector<std::string>& dataset_ids,
                              const SelectorFn& selector,
                              fusion::Normalization norm = fusion::Normalization::Softmax) {
    if (dataset_ids.size() < 2)
        throw ValidationError("loo_protocol: need at least 2 datasets");

    LooResult result;
    double accuracy_sum = 0.0;
    for (const auto& held_out : dataset_ids) {
        std::vector<std::string> held_in;
        for (const auto& d : dataset_ids)
            if (d != held_out) held_in.push_back(d);

        const CandidateSet train_set = assemble_candidates(zoo, held_in, norm);
        auto [subset, weights] = selector(train_set);
        if (subset.empty())
            throw ValidationError("selector returned an empty subset for held-out '" + held_out +
                                  "'");

        const CandidateSet eval_set = assemble_candidates(zoo, {held_out}, norm);
        const DatasetBlock& block = eval_set.blocks.front();
        std::vector<double> fused(block.labels.size() *
                                      static_cast<std::size_t>(block.n_classes),
                                  0.0);
        for (std::size_t s = 0; s < subset.size(); ++s) {
            const auto it = std::find(eval_set.ids.begin(), eval_set.ids.end(), subset[s]);
            if (it == eval_set.ids.end())
                throw CoverageError("classifier '" + subset[s] + "' has no scores on dataset '" +
                                    held_out + "'");
            const auto idx = static_cast<std::size_t>(it - eval_set.ids.begin());
            for (std::size_t k = 0; k < fused.size(); ++k)
                fused[k] += weights[s] * block.scores[idx][k];
        }

        LooPerDataset per;
        per.held_out = held_out;
        per.subset = subset;
        per.weights = weights;
        per.sample_ids = block.sample_ids;
        per.labels = block.labels;
        per.predictions.resize(block.labels.size());
        const auto c_count = static_cast<std::size_t>(block.n_classes);
        for (std::size_t t = 0; t < block.labels.size(); ++t) {
            const double* row = fused.data() + t * c_count;
            int best = 0;
            for (std::size_t c = 1; c < c_count; ++c)
                if (row[c] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
            per.predictions[t] = best;
        }
        per.accuracy = metrics::accuracy_overall(
            metrics::confusion(per.predictions, per.labels, block.n_classes));
        accuracy_sum += per.accuracy;
        result.per_dataset.push_back(std::move(per));
    }
    result.avg_accuracy = accuracy_sum / static_cast<double>(result.per_dataset.size());
    return result;
}

/// One `<held_out>.predictions.csv` per dataset: sample_id,label,prediction.
inline void write_loo_predictions(const LooResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& per : result.per_dataset) {
        std::ofstream out(dir / (per.held_out + ".predictions.csv"), std::ios::binary);
        if (!out) throw Error("cannot write predictions for '" + per.held_out + "'");
        out << "sample_id,label,prediction\n";
        for (std::size_t t = 0; t < per.labels.size(); ++t)
            out << per.sample_ids[t] << ',' << per.labels[t] << ',' << per.predictions[t]
                << "\n";
    }
}

} // namespace ensemblier::selection
