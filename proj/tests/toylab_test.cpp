#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "ensemblier/fusion.hpp"
#include "ensemblier/manifest.hpp"
#include "ensemblier/metrics.hpp"
#include "ensemblier/toylab.hpp"
#include "test_helpers.hpp"

using namespace ensemblier;
using toylab::Activation;
using toylab::FeatureTransform;
using toylab::ModelKind;
using toylab::ToyDataset;
using toylab::ToyModel;
using toylab::TrainConfig;

namespace {

double train_accuracy(const ToyModel& model, const ToyDataset& data) {
    long long correct = 0;
    for (std::size_t t = 0; t < data.n(); ++t) {
        const auto z = model.logits(data.sample(t));
        const int pred = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
        if (pred == data.labels[t]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.n());
}

double mean_crossentropy(const ToyModel& model, const ToyDataset& data) {
    double ce = 0.0;
    for (std::size_t t = 0; t < data.n(); ++t) {
        auto z = model.logits(data.sample(t));
        const double m = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (auto& v : z) {
            v = std::exp(v - m);
            sum += v;
        }
        ce -= std::log(z[static_cast<std::size_t>(data.labels[t])] / sum);
    }
    return ce / static_cast<double>(data.n());
}

toylab::SyntheticTaskSpec small_spec(double noise, std::uint64_t seed, int n_classes = 3,
                                     int n = 240) {
    return toylab::make_task_spec("small", n_classes, 8, n, noise, 8.0, seed);
}

} // namespace

TEST(GenTask, NoiseZeroCollapsesToMeansAndSeparates) {
    const auto spec = small_spec(0.0, 5);
    const auto data = toylab::gen_task(spec);
    for (std::size_t t = 0; t < data.n(); ++t) {
        const auto x = data.sample(t);
        const double* mean = spec.class_means.data() +
                             static_cast<std::size_t>(data.labels[t]) * 8;
        for (int k = 0; k < 8; ++k) EXPECT_DOUBLE_EQ(x[static_cast<std::size_t>(k)], mean[k]);
    }
    TrainConfig cfg;
    cfg.seed = 3;
    auto model = toylab::train(
        ToyModel::make(ModelKind::Linear, Activation::ReLU, 8, 3, 0, cfg.seed), data, cfg);
    EXPECT_GE(train_accuracy(model, data), 0.99);
}

TEST(GenTask, DeterministicInSeed) {
    const auto a = toylab::gen_task(small_spec(1.5, 7));
    const auto b = toylab::gen_task(small_spec(1.5, 7));
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.labels, b.labels);
    const auto c = toylab::gen_task(small_spec(1.5, 8));
    EXPECT_NE(a.features, c.features);
}

TEST(GenTask, LargeNoiseHasPositiveBayesError) {
    const auto spec = small_spec(12.0, 11, 3, 3000);
    const auto data = toylab::gen_task(spec);
    // Monte-Carlo Bayes oracle: equal isotropic Gaussians -> nearest mean
    long long wrong = 0;
    for (std::size_t t = 0; t < data.n(); ++t) {
        const auto x = data.sample(t);
        int best = 0;
        double best_d = 1e300;
        for (int c = 0; c < spec.n_classes; ++c) {
            double d2 = 0.0;
            for (int k = 0; k < spec.dim; ++k) {
                const double diff = x[static_cast<std::size_t>(k)] -
                                    spec.class_means[static_cast<std::size_t>(c * spec.dim + k)];
                d2 += diff * diff;
            }
            if (d2 < best_d) {
                best_d = d2;
                best = c;
            }
        }
        if (best != data.labels[t]) ++wrong;
    }
    const double bayes_error = static_cast<double>(wrong) / static_cast<double>(data.n());
    std::printf("[ info ] empirical Bayes-rate estimate: error=%.4f on noise=12.0\n", bayes_error);
    EXPECT_GT(bayes_error, 0.0);
}

TEST(GenTask, RejectsDegenerateSpecs) {
    auto spec = small_spec(1.0, 1);
    spec.n_classes = 1;
    spec.class_means.resize(8);
    EXPECT_THROW(toylab::gen_task(spec), ValidationError);
    auto dup = small_spec(1.0, 2);
    std::copy(dup.class_means.begin(), dup.class_means.begin() + 8,
              dup.class_means.begin() + 8); // class 1 mean == class 0 mean
    EXPECT_THROW(toylab::gen_task(dup), ValidationError);
}

TEST(Selu, KnownValuesAndLimit) {
    EXPECT_DOUBLE_EQ(toylab::selu(0.0), 0.0);
    EXPECT_NEAR(toylab::selu(1.0), 1.0507009873554805, 1e-12);
    // x -> -inf approaches -lambda*alpha
    EXPECT_NEAR(toylab::selu(-40.0), -toylab::kSeluLambda * toylab::kSeluAlpha, 1e-12);
    // positive side is linear
    EXPECT_DOUBLE_EQ(toylab::selu(3.0), 3.0 * toylab::kSeluLambda);
}

TEST(Selu, DerivativeMatchesFiniteDifferences) {
    for (double x : {-2.0, -0.5, 0.3, 1.7}) {
        const double h = 1e-7;
        const double fd = (toylab::selu(x + h) - toylab::selu(x - h)) / (2.0 * h);
        EXPECT_NEAR(toylab::selu_derivative(x), fd, 1e-6);
    }
}

TEST(Train, ConfigDefaults) {
    const TrainConfig cfg;
    EXPECT_EQ(cfg.epochs, 30);
    EXPECT_DOUBLE_EQ(cfg.lr, 0.001);
    EXPECT_EQ(cfg.batch, 32);
    EXPECT_EQ(cfg.snapshot_every, 3);
    EXPECT_EQ(cfg.total_snapshot_epochs, 45);
    EXPECT_EQ(cfg.total_snapshot_epochs / cfg.snapshot_every, 15);
}

TEST(Train, SnapshotDefaultsYieldFifteenModels) {
    const auto data = toylab::gen_task(small_spec(1.5, 21));
    TrainConfig cfg;
    cfg.seed = 4;
    const auto snapshots = toylab::train_snapshots(
        ToyModel::make(ModelKind::Linear, Activation::ReLU, 8, 3, 0, cfg.seed), data, cfg);
    ASSERT_EQ(snapshots.size(), 15u);
    EXPECT_EQ(snapshots.front().first, 3);
    EXPECT_EQ(snapshots.back().first, 45);
    // distinct epochs give distinct weights on a noisy task
    for (std::size_t i = 1; i < snapshots.size(); ++i)
        EXPECT_NE(snapshots[i].second.w2, snapshots[i - 1].second.w2);
}

TEST(Train, BitwiseDeterministicInSeed) {
    const auto data = toylab::gen_task(small_spec(2.0, 23));
    TrainConfig cfg;
    cfg.seed = 9;
    const auto m1 = toylab::train(
        ToyModel::make(ModelKind::Mlp1, Activation::ReLU, 8, 3, 12, cfg.seed), data, cfg);
    const auto m2 = toylab::train(
        ToyModel::make(ModelKind::Mlp1, Activation::ReLU, 8, 3, 12, cfg.seed), data, cfg);
    EXPECT_EQ(m1, m2);
}

TEST(Train, DimensionMismatchIsAnError) {
    const auto data = toylab::gen_task(small_spec(1.0, 2));
    TrainConfig cfg;
    EXPECT_THROW(
        toylab::train(ToyModel::make(ModelKind::Linear, Activation::ReLU, 5, 3, 0, 1), data,
                      cfg),
        ValidationError);
}

TEST(TwoRound, DegenerateEqualsDoubleLengthRun) {
    const auto data = toylab::gen_task(small_spec(1.8, 31));
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 77;
    const auto model = ToyModel::make(ModelKind::Mlp1, Activation::ReLU, 8, 3, 12, cfg.seed);

    const auto two_round = toylab::two_round_train(model, data, data, cfg);
    TrainConfig doubled = cfg;
    doubled.epochs = 20;
    const auto straight = toylab::train(model, data, doubled);
    EXPECT_EQ(two_round, straight);
}

TEST(TwoRound, PretrainingOnRelatedTaskLowersStartingLoss) {
    // paired-seed comparison: crossentropy on the target at the start of
    // round two (after pretraining on a jittered-means relative) vs a fresh
    // random initialization
    double pretrained_sum = 0.0, fresh_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto target_spec = small_spec(1.5, 1000 + seed);
        const auto target = toylab::gen_task(target_spec);
        const auto related = toylab::gen_task(
            toylab::related_task_spec(target_spec, 0.3, 2000 + seed));

        TrainConfig cfg;
        cfg.seed = seed;
        const auto init = ToyModel::make(ModelKind::Mlp1, Activation::ReLU, 8, 3, 12, seed);
        const auto pretrained = toylab::train(init, related, cfg);
        pretrained_sum += mean_crossentropy(pretrained, target);
        fresh_sum += mean_crossentropy(init, target);
    }
    EXPECT_LT(pretrained_sum / 20.0, fresh_sum / 20.0);
}

TEST(TwoRound, UnrelatedTaskStillConverges) {
    const auto target = toylab::gen_task(small_spec(0.5, 41));
    const auto unrelated = toylab::gen_task(
        toylab::make_task_spec("noise", 3, 8, 200, 6.0, 0.1, 999));
    TrainConfig cfg;
    cfg.seed = 12;
    const auto model = toylab::two_round_train(
        ToyModel::make(ModelKind::Mlp1, Activation::ReLU, 8, 3, 12, cfg.seed), unrelated,
        target, cfg);
    EXPECT_GE(train_accuracy(model, target), 0.9);
}

TEST(Transforms, BChangesRepresentationInvertibly) {
    const auto data = toylab::gen_task(small_spec(1.0, 43));
    const auto a = toylab::apply_transform(data, FeatureTransform::A);
    const auto b = toylab::apply_transform(data, FeatureTransform::B);
    EXPECT_EQ(a.features, data.features); // A is the identity
    EXPECT_NE(b.features, data.features);
    EXPECT_EQ(b.labels, data.labels);
    // deterministic
    const auto b2 = toylab::apply_transform(data, FeatureTransform::B);
    EXPECT_EQ(b.features, b2.features);
}

TEST(ToyZoo, MinimalGridWritesOneFilePerDataset) {
    helpers::TempDir tmp("zoo-min");
    toylab::ToySuiteConfig cfg;
    cfg.seed = 3;
    cfg.grid = toylab::GridSpec::minimal();
    const auto manifest = toylab::build_toy_zoo(tmp.path(), cfg);
    EXPECT_EQ(manifest.entries.size(), 5u);
    EXPECT_EQ(cfg.grid.entries_per_split(), 1);
    for (const auto& e : manifest.entries) {
        EXPECT_TRUE(std::filesystem::exists(tmp.path() / e.path)) << e.path;
        EXPECT_EQ(e.record.tuning, Tuning::OneRound);
    }
    const auto report = validate_zoo(manifest);
    EXPECT_TRUE(report.all_ok());
}

TEST(ToyZoo, DefaultGridMatchesClosedFormCount) {
    helpers::TempDir tmp("zoo-def");
    toylab::ToySuiteConfig cfg;
    cfg.seed = 17;
    cfg.n_datasets = 2; // cheaper; the count formula scales per dataset
    const auto manifest = toylab::build_toy_zoo(tmp.path(), cfg);
    // kinds(2) x transforms(2) x {1R, 2R} + selu(mlp x 2) + inc(2x2x15)
    EXPECT_EQ(cfg.grid.entries_per_split(), 4 + 4 + 2 + 60);
    EXPECT_EQ(manifest.entries.size(),
              static_cast<std::size_t>(2 * cfg.grid.entries_per_split()));
    EXPECT_TRUE(validate_zoo(manifest).all_ok());

    std::set<std::string> tunings;
    for (const auto& e : manifest.entries) tunings.insert(to_string(e.record.tuning));
    EXPECT_EQ(tunings, (std::set<std::string>{"1R", "2R", "INC", "SELU"}));

    // INC snapshots carry their epoch tag
    int inc_count = 0;
    for (const auto& e : manifest.entries)
        if (e.record.tuning == Tuning::Incremental) {
            ++inc_count;
            ASSERT_TRUE(e.record.epoch_tag.has_value());
            EXPECT_EQ(*e.record.epoch_tag % 3, 0);
        }
    EXPECT_EQ(inc_count, 2 * 60);
}

TEST(ToyZoo, RegenerationIsByteIdentical) {
    helpers::TempDir tmp1("zoo-det1");
    helpers::TempDir tmp2("zoo-det2");
    toylab::ToySuiteConfig cfg;
    cfg.seed = 99;
    cfg.n_datasets = 2;
    cfg.grid = toylab::GridSpec::minimal();
    cfg.grid.mlp = true;
    cfg.grid.two_round = true;
    toylab::build_toy_zoo(tmp1.path(), cfg);
    toylab::build_toy_zoo(tmp2.path(), cfg);

    auto read_file = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    std::vector<std::filesystem::path> files1;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(tmp1.path()))
        if (entry.is_regular_file()) files1.push_back(entry.path());
    ASSERT_FALSE(files1.empty());
    for (const auto& f1 : files1) {
        const auto rel = std::filesystem::relative(f1, tmp1.path());
        const auto f2 = tmp2.path() / rel;
        ASSERT_TRUE(std::filesystem::exists(f2)) << rel;
        EXPECT_EQ(read_file(f1), read_file(f2)) << rel;
    }
}

TEST(ToyZoo, VariantsDisagreeButAreAllCompetent) {
    helpers::TempDir tmp("zoo-div");
    toylab::ToySuiteConfig cfg;
    cfg.seed = 1;
    cfg.n_datasets = 2;
    cfg.grid.incremental = false; // tuned members only
    const auto manifest = toylab::build_toy_zoo(tmp.path(), cfg);
    Zoo zoo(manifest);

    std::map<std::string, std::vector<const ManifestEntry*>> by_dataset;
    for (const auto& e : manifest.entries) by_dataset[e.dataset_id].push_back(&e);

    for (const auto& [dataset, entries] : by_dataset) {
        std::vector<std::vector<int>> preds;
        std::vector<std::string> ids;
        for (const auto* e : entries) {
            const auto sm = zoo.load(*e);
            preds.push_back(fusion::predict(sm));
            ids.push_back(e->record.classifier_id);
            const auto cm = metrics::confusion(preds.back(), sm.labels, sm.n_classes);
            EXPECT_GE(metrics::accuracy_overall(cm), 0.5)
                << e->record.classifier_id << " on " << dataset;
        }
        // pairwise disagreement >= 1% of samples between distinct variants
        const double n = static_cast<double>(preds.front().size());
        for (std::size_t i = 0; i < preds.size(); ++i)
            for (std::size_t j = i + 1; j < preds.size(); ++j) {
                int differ = 0;
                for (std::size_t t = 0; t < preds[i].size(); ++t)
                    if (preds[i][t] != preds[j][t]) ++differ;
                EXPECT_GE(differ / n, 0.01)
                    << ids[i] << " vs " << ids[j] << " on " << dataset;
            }
    }
}

TEST(ToyZoo, SeluAndReluModelsDiffer) {
    helpers::TempDir tmp("zoo-selu");
    toylab::ToySuiteConfig cfg;
    cfg.seed = 2;
    cfg.n_datasets = 1;
    cfg.grid.incremental = false;
    cfg.grid.linear = false;
    const auto manifest = toylab::build_toy_zoo(tmp.path(), cfg);
    Zoo zoo(manifest);

    const ManifestEntry* relu = nullptr;
    const ManifestEntry* selu = nullptr;
    for (const auto& e : manifest.entries) {
        if (e.record.classifier_id == "toy-mlp-sqr-1R") relu = &e;
        if (e.record.classifier_id == "toy-mlp-sqr-SELU") selu = &e;
    }
    ASSERT_NE(relu, nullptr);
    ASSERT_NE(selu, nullptr);
    const auto pr = fusion::predict(zoo.load(*relu));
    const auto ps = fusion::predict(zoo.load(*selu));
    EXPECT_NE(pr, ps);
}

TEST(ToyZoo, TaskCsvExport) {
    helpers::TempDir tmp("task-csv");
    const auto data = toylab::gen_task(small_spec(1.0, 3, 3, 60));
    toylab::write_task_csv(data, tmp.path() / "task.csv");
    std::ifstream in(tmp.path() / "task.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "sample_id,label,f0,f1,f2,f3,f4,f5,f6,f7");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    EXPECT_EQ(rows, 60);
}
