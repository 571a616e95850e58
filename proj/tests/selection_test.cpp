#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "ensemblier/fusion.hpp"
#include "ensemblier/metrics.hpp"
#include "ensemblier/rng.hpp"
#include "ensemblier/selection.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace ensemblier;
using selection::CandidateSet;
using selection::Objective;
using selection::SelectionConfig;
using selection::SffsStep;

namespace {

ScoreMatrix margin_member(const std::string& id, const std::vector<int>& labels,
                          const std::vector<double>& margins) {
    ScoreMatrix sm;
    sm.classifier_id = id;
    sm.dataset_id = "d";
    sm.split_id = "half/test";
    sm.n_classes = 2;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        sm.sample_ids.push_back("s" + std::to_string(t));
        sm.labels.push_back(labels[t]);
        const double correct = 0.5 + margins[t] / 2.0;
        if (labels[t] == 0) {
            sm.scores.push_back(correct);
            sm.scores.push_back(1.0 - correct);
        } else {
            sm.scores.push_back(1.0 - correct);
            sm.scores.push_back(correct);
        }
    }
    return sm;
}

/// Complementary-error instance: a is a 0.9-accuracy generalist, b and c are
/// confident specialists on opposite halves whose fusion is perfect.
/// Exhaustive optimum of size 2 is always {b, c}.
std::vector<ScoreMatrix> complementary_instance(Rng& rng, std::size_t n = 20) {
    std::vector<int> labels;
    for (std::size_t t = 0; t < n; ++t)
        labels.push_back(static_cast<int>(rng.next_below(2)));
    const std::size_t half = n / 2;
    auto jitter = [&rng](double lo, double hi) {
        return lo + (hi - lo) * rng.next_double();
    };

    std::vector<double> ma(n), mb(n), mc(n);
    const std::size_t wrong_s1 = rng.next_below(half);
    const std::size_t wrong_s2 = half + rng.next_below(n - half);
    for (std::size_t t = 0; t < n; ++t) {
        const double a = jitter(0.26, 0.34);
        ma[t] = (t == wrong_s1 || t == wrong_s2) ? -a : a;
        const double strong = jitter(0.7, 0.9);
        const double weak = jitter(0.16, 0.24);
        mb[t] = t < half ? strong : -weak;
        mc[t] = t < half ? -weak : strong;
    }
    return {margin_member("a", labels, ma), margin_member("b", labels, mb),
            margin_member("c", labels, mc)};
}

std::vector<ScoreMatrix> random_candidates(Rng& rng, int n_candidates, std::size_t rows,
                                           int n_classes) {
    std::vector<int> labels;
    for (std::size_t t = 0; t < rows; ++t)
        labels.push_back(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_classes))));
    std::vector<ScoreMatrix> out;
    for (int i = 0; i < n_candidates; ++i) {
        auto sm = helpers::random_scores("m" + std::to_string(i), "d", "s", rows, n_classes, rng,
                                         &labels);
        helpers::softmax_rows(sm);
        out.push_back(std::move(sm));
    }
    return out;
}

} // namespace

TEST(Sffs, KTargetOneIsBestSingle) {
    Rng rng(1);
    const auto candidates = random_candidates(rng, 6, 60, 3);
    const auto set = CandidateSet::from_matrices(candidates);
    selection::SubsetEvaluator evaluator(set, Objective::AccuracyOverall);

    const auto result = selection::sffs(candidates, SelectionConfig{1});
    ASSERT_EQ(result.selected.size(), 1u);
    double best = -1.0;
    std::string best_id;
    for (int i = 0; i < 6; ++i) {
        const double obj = evaluator.evaluate(std::vector<int>{i});
        if (obj > best) {
            best = obj;
            best_id = set.ids[static_cast<std::size_t>(i)];
        }
    }
    EXPECT_EQ(result.selected[0], best_id);
    EXPECT_DOUBLE_EQ(result.objective, best);
}

TEST(Sffs, ComplementaryInstanceTriggersBacktrackAndFindsOptimum) {
    Rng rng(42);
    int backtracks_seen = 0;
    for (int trial = 0; trial < 25; ++trial) {
        const auto candidates = complementary_instance(rng);
        const auto result = selection::sffs(candidates, SelectionConfig{2});
        EXPECT_EQ(result.selected, (std::vector<std::string>{"b", "c"})) << "trial " << trial;
        EXPECT_DOUBLE_EQ(result.objective, 1.0);
        const auto exhaustive = selection::exhaustive_best(
            CandidateSet::from_matrices(candidates), 2, Objective::AccuracyOverall);
        EXPECT_EQ(result.selected, exhaustive.ids);
        const bool removed =
            std::any_of(result.trace.begin(), result.trace.end(), [](const SffsStep& s) {
                return s.kind == SffsStep::Kind::Remove;
            });
        EXPECT_TRUE(removed) << "no backtrack step in trial " << trial;
        backtracks_seen += removed;
    }
    EXPECT_EQ(backtracks_seen, 25);
}

TEST(Sffs, PartitionInvariantHoldsAlongTrace) {
    Rng rng(7);
    const auto candidates = random_candidates(rng, 6, 50, 4);
    const auto result = selection::sffs(candidates, SelectionConfig{4});

    std::set<std::string> all;
    for (const auto& c : candidates) all.insert(c.classifier_id);
    std::set<std::string> ss, rs = all;
    for (const auto& step : result.trace) {
        if (step.kind == SffsStep::Kind::Add) {
            ASSERT_TRUE(rs.erase(step.id)) << "added a member not in RS";
            ASSERT_TRUE(ss.insert(step.id).second);
        } else {
            ASSERT_TRUE(ss.erase(step.id)) << "removed a member not in SS";
            ASSERT_TRUE(rs.insert(step.id).second);
        }
        EXPECT_EQ(ss.size() + rs.size(), all.size());
        EXPECT_EQ(static_cast<int>(ss.size()), step.size_after);
    }
}

TEST(Sffs, NeverWorseThanBestSingleAndBoundedByExhaustive) {
    Rng rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 3 + static_cast<int>(rng.next_below(4)); // 3..6
        const int k = 2 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n - 1)));
        const auto candidates = random_candidates(rng, n, 40, 3);
        const auto set = CandidateSet::from_matrices(candidates);
        const auto result = selection::sffs(candidates, SelectionConfig{k});

        const auto best_single = selection::exhaustive_best(set, 1, Objective::AccuracyOverall);
        EXPECT_GE(result.objective, best_single.objective);

        for (const auto& [size, rec] : result.best_by_size) {
            if (size > k) continue;
            const auto exhaustive =
                selection::exhaustive_best(set, size, Objective::AccuracyOverall);
            EXPECT_GE(exhaustive.objective, rec.objective)
                << "floating search beat exhaustive enumeration at size " << size;
        }
    }
}

TEST(Sffs, DeterministicForIdenticalInputs) {
    Rng rng(5);
    const auto candidates = random_candidates(rng, 5, 80, 4);
    const auto a = selection::sffs(candidates, SelectionConfig{3});
    const auto b = selection::sffs(candidates, SelectionConfig{3});
    EXPECT_EQ(a.selected, b.selected);
    EXPECT_EQ(a.objective, b.objective);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        EXPECT_EQ(a.trace[i].id, b.trace[i].id);
        EXPECT_EQ(a.trace[i].objective, b.trace[i].objective);
    }
}

TEST(Sffs, RecordedObjectivesOnlyImprove) {
    Rng rng(31);
    const auto candidates = random_candidates(rng, 6, 60, 3);
    const auto result = selection::sffs(candidates, SelectionConfig{6});
    // trace replay: any later record at the same size must strictly improve
    std::map<int, double> best;
    for (const auto& step : result.trace) {
        auto it = best.find(step.size_after);
        if (it == best.end())
            best[step.size_after] = step.objective;
        else if (step.objective > it->second)
            it->second = step.objective;
    }
    for (const auto& [size, rec] : result.best_by_size)
        EXPECT_DOUBLE_EQ(rec.objective, best.at(size));
}

TEST(Sffs, RejectsBadConfig) {
    Rng rng(2);
    const auto candidates = random_candidates(rng, 3, 20, 2);
    EXPECT_THROW(selection::sffs(candidates, SelectionConfig{0}), ValidationError);
    EXPECT_THROW(selection::sffs(candidates, SelectionConfig{4}), ValidationError);
    EXPECT_THROW(selection::sffs(std::vector<ScoreMatrix>{}, SelectionConfig{1}),
                 ValidationError);
}

TEST(SubsetEvaluator, HeterogeneousClassCountsWithMacroF) {
    // two datasets with different class counts: the macro-F objective is the
    // mean of the per-dataset values, the accuracy objective pools samples
    Rng rng(61);
    CandidateSet set;
    set.ids = {"x", "y"};
    for (const auto& [dataset, n_classes, rows] :
         std::initializer_list<std::tuple<const char*, int, std::size_t>>{{"d3", 3, 30},
                                                                          {"d5", 5, 20}}) {
        selection::DatasetBlock block;
        block.dataset_id = dataset;
        block.n_classes = n_classes;
        for (std::size_t t = 0; t < rows; ++t) {
            block.sample_ids.push_back("s" + std::to_string(t));
            block.labels.push_back(
                static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_classes))));
        }
        for (int i = 0; i < 2; ++i) {
            std::vector<double> scores;
            for (std::size_t t = 0; t < rows * static_cast<std::size_t>(n_classes); ++t)
                scores.push_back(rng.next_double());
            block.scores.push_back(std::move(scores));
        }
        set.blocks.push_back(std::move(block));
    }

    for (auto objective : {Objective::AccuracyOverall, Objective::FMacro}) {
        selection::SubsetEvaluator evaluator(set, objective);
        const std::vector<int> subset{0, 1};
        double expected;
        if (objective == Objective::FMacro) {
            double sum = 0.0;
            for (const auto& block : set.blocks) {
                std::vector<double> fused(block.scores[0]);
                for (std::size_t k = 0; k < fused.size(); ++k) fused[k] += block.scores[1][k];
                const auto preds = oracles::argmax_rows(fused, block.n_classes);
                sum += metrics::f_measure_macro(
                    metrics::confusion(preds, block.labels, block.n_classes));
            }
            expected = sum / 2.0;
        } else {
            double correct = 0.0, total = 0.0;
            for (const auto& block : set.blocks) {
                std::vector<double> fused(block.scores[0]);
                for (std::size_t k = 0; k < fused.size(); ++k) fused[k] += block.scores[1][k];
                const auto preds = oracles::argmax_rows(fused, block.n_classes);
                for (std::size_t t = 0; t < preds.size(); ++t)
                    if (preds[t] == block.labels[t]) correct += 1.0;
                total += static_cast<double>(preds.size());
            }
            expected = correct / total;
        }
        EXPECT_DOUBLE_EQ(evaluator.evaluate(subset), expected);
    }
}

TEST(ExhaustiveBest, FullSetAndSingles) {
    Rng rng(3);
    const auto candidates = random_candidates(rng, 4, 30, 3);
    const auto set = CandidateSet::from_matrices(candidates);

    const auto full = selection::exhaustive_best(set, 4, Objective::AccuracyOverall);
    EXPECT_EQ(full.ids.size(), 4u);

    const auto single = selection::exhaustive_best(set, 1, Objective::AccuracyOverall);
    const auto via_sffs = selection::sffs(candidates, SelectionConfig{1});
    EXPECT_EQ(single.ids, via_sffs.selected);
}

TEST(ExhaustiveBest, BudgetGuard) {
    Rng rng(4);
    const auto candidates = random_candidates(rng, 30, 4, 2);
    const auto set = CandidateSet::from_matrices(candidates);
    EXPECT_THROW(selection::exhaustive_best(set, 15, Objective::AccuracyOverall, 1000),
                 BudgetError);
}

// ---------------------------------------------------------------------------
// Leave-one-out-dataset protocol
// ---------------------------------------------------------------------------

namespace {

/// Zoo over several datasets; member quality = probability its argmax is the
/// true class.
struct QualitySpec {
    std::string id;
    double quality = 0.8;
};

std::filesystem::path write_quality_zoo(const std::filesystem::path& root,
                                        const std::vector<std::string>& datasets,
                                        const std::vector<QualitySpec>& members,
                                        std::uint64_t seed, int n_classes = 4,
                                        std::size_t rows = 160,
                                        const std::set<std::pair<std::string, std::string>>&
                                            skip = {}) {
    Manifest manifest;
    manifest.zoo_root = root;
    for (const auto& d : datasets)
        manifest.per_dataset_classes[d] = ClassMap::of_size(n_classes).names();

    Rng rng(seed);
    for (const auto& d : datasets) {
        std::vector<int> labels;
        for (std::size_t t = 0; t < rows; ++t)
            labels.push_back(
                static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_classes))));
        for (const auto& m : members) {
            if (skip.count({m.id, d})) continue;
            ScoreMatrix sm;
            sm.classifier_id = m.id;
            sm.dataset_id = d;
            sm.split_id = "half/test";
            sm.n_classes = n_classes;
            for (std::size_t t = 0; t < rows; ++t) {
                sm.sample_ids.push_back("s" + std::to_string(t));
                sm.labels.push_back(labels[t]);
                int peak = labels[t];
                if (rng.next_double() > m.quality) {
                    peak = static_cast<int>(
                        rng.next_below(static_cast<std::uint64_t>(n_classes)));
                }
                for (int c = 0; c < n_classes; ++c)
                    sm.scores.push_back((c == peak ? 4.0 : 0.0) + rng.next_double());
            }
            const std::string rel = d + "/" + m.id + ".csv";
            save_scores(sm, root / rel);
            ManifestEntry entry;
            entry.record.classifier_id = m.id;
            entry.dataset_id = d;
            entry.split_id = "half/test";
            entry.path = rel;
            manifest.entries.push_back(std::move(entry));
        }
    }
    const auto path = root / "manifest.json";
    manifest.save(path);
    return path;
}

} // namespace

TEST(LooProtocol, SingleClassifierZoo) {
    helpers::TempDir tmp("loo");
    const std::vector<std::string> datasets{"d0", "d1", "d2", "d3", "d4"};
    const auto path = write_quality_zoo(tmp.path(), datasets, {{"solo", 0.85}}, 71);
    Zoo zoo(Manifest::load(path));

    const auto result =
        selection::loo_protocol(zoo, datasets, selection::sffs_selector(SelectionConfig{1}));
    ASSERT_EQ(result.per_dataset.size(), 5u);
    double sum = 0.0;
    for (const auto& per : result.per_dataset) {
        EXPECT_EQ(per.subset, (std::vector<std::string>{"solo"}));
        sum += per.accuracy;
    }
    EXPECT_DOUBLE_EQ(result.avg_accuracy, sum / 5.0);
}

TEST(LooProtocol, DominantClassifierIsAlwaysSelected) {
    helpers::TempDir tmp("loo");
    const std::vector<std::string> datasets{"d0", "d1", "d2", "d3", "d4"};
    const auto path = write_quality_zoo(
        tmp.path(), datasets,
        {{"ace", 0.97}, {"meh1", 0.45}, {"meh2", 0.4}, {"meh3", 0.42}}, 13);
    Zoo zoo(Manifest::load(path));

    const auto result =
        selection::loo_protocol(zoo, datasets, selection::sffs_selector(SelectionConfig{2}));
    for (const auto& per : result.per_dataset) {
        EXPECT_TRUE(std::find(per.subset.begin(), per.subset.end(), "ace") != per.subset.end())
            << "held out " << per.held_out;
    }
}

TEST(LooProtocol, AvgAccuracyMatchesPredictionRecount) {
    helpers::TempDir tmp("loo");
    const std::vector<std::string> datasets{"d0", "d1", "d2", "d3"};
    const auto path = write_quality_zoo(tmp.path(), datasets,
                                        {{"a", 0.9}, {"b", 0.7}, {"c", 0.6}}, 5);
    Zoo zoo(Manifest::load(path));
    const auto result =
        selection::loo_protocol(zoo, datasets, selection::sffs_selector(SelectionConfig{2}));

    selection::write_loo_predictions(result, tmp.path() / "preds");
    double sum = 0.0;
    for (const auto& per : result.per_dataset) {
        std::ifstream in(tmp.path() / "preds" / (per.held_out + ".predictions.csv"));
        ASSERT_TRUE(in.good());
        std::string line;
        std::getline(in, line);
        EXPECT_EQ(line, "sample_id,label,prediction");
        long long correct = 0, total = 0;
        while (std::getline(in, line)) {
            const auto fields = split_csv_line(line);
            ASSERT_EQ(fields.size(), 3u);
            ++total;
            if (fields[1] == fields[2]) ++correct;
        }
        const double acc = static_cast<double>(correct) / static_cast<double>(total);
        EXPECT_DOUBLE_EQ(acc, per.accuracy);
        sum += acc;
    }
    EXPECT_DOUBLE_EQ(result.avg_accuracy, sum / 4.0);
}

TEST(LooProtocol, PoolsEveryTestSplitOfADataset) {
    helpers::TempDir tmp("loo-folds");
    // two datasets, two folds each, two classifiers
    Manifest manifest;
    manifest.zoo_root = tmp.path();
    Rng rng(23);
    const int n_classes = 3;
    for (const std::string d : {"d0", "d1"}) {
        manifest.per_dataset_classes[d] = ClassMap::of_size(n_classes).names();
        for (const std::string split : {"fold0/test", "fold1/test"}) {
            std::vector<int> labels;
            for (int t = 0; t < 40; ++t)
                labels.push_back(static_cast<int>(rng.next_below(n_classes)));
            for (const std::string id : {"a", "b"}) {
                auto sm = helpers::random_scores(id, d, split, 40, n_classes, rng, &labels);
                std::string rel = d + "/" + split + "/" + id + ".csv";
                save_scores(sm, tmp.path() / rel);
                ManifestEntry entry;
                entry.record.classifier_id = id;
                entry.dataset_id = d;
                entry.split_id = split;
                entry.path = rel;
                manifest.entries.push_back(std::move(entry));
            }
        }
    }
    Zoo zoo(manifest);
    const auto result = selection::loo_protocol(
        zoo, {"d0", "d1"}, selection::sffs_selector(SelectionConfig{2}));
    for (const auto& per : result.per_dataset) {
        EXPECT_EQ(per.labels.size(), 80u); // both folds pooled
        // recompute the held-out accuracy from the selected members' files
        std::vector<double> fused(80 * n_classes, 0.0);
        std::size_t offset = 0;
        std::vector<int> labels;
        for (const std::string split : {"fold0/test", "fold1/test"}) {
            for (const auto& id : per.subset) {
                auto entries = zoo.select([&](const ManifestEntry& e) {
                    return e.record.classifier_id == id && e.dataset_id == per.held_out &&
                           e.split_id == split;
                });
                ASSERT_EQ(entries.size(), 1u);
                const auto sm = fusion::normalize_rows(zoo.load(*entries.front()),
                                                       fusion::Normalization::Softmax);
                for (std::size_t k = 0; k < sm.scores.size(); ++k)
                    fused[offset * n_classes + k] += sm.scores[k];
            }
            auto entries = zoo.select([&](const ManifestEntry& e) {
                return e.record.classifier_id == "a" && e.dataset_id == per.held_out &&
                       e.split_id == split;
            });
            const auto ref = zoo.load(*entries.front());
            labels.insert(labels.end(), ref.labels.begin(), ref.labels.end());
            offset += ref.n_rows();
        }
        long long correct = 0;
        for (std::size_t t = 0; t < labels.size(); ++t) {
            const double* row = fused.data() + t * n_classes;
            int best = 0;
            for (int c = 1; c < n_classes; ++c)
                if (row[c] > row[best]) best = c;
            if (best == labels[t]) ++correct;
        }
        EXPECT_DOUBLE_EQ(per.accuracy,
                         static_cast<double>(correct) / static_cast<double>(labels.size()));
    }
}

TEST(LooProtocol, MissingClassifierIsACoverageError) {
    helpers::TempDir tmp("loo");
    const std::vector<std::string> datasets{"d0", "d1", "d2"};
    const auto path = write_quality_zoo(tmp.path(), datasets, {{"a", 0.8}, {"b", 0.7}}, 17, 4,
                                        60, {{"b", "d1"}});
    Zoo zoo(Manifest::load(path));
    try {
        selection::loo_protocol(zoo, datasets, selection::sffs_selector(SelectionConfig{1}));
        FAIL() << "expected CoverageError";
    } catch (const CoverageError& e) {
        EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("d1"), std::string::npos);
    }
}
