#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "ensemblier/errors.hpp"
#include "ensemblier/manifest.hpp"
#include "ensemblier/parallel.hpp"
#include "ensemblier/rng.hpp"
#include "ensemblier/score_io.hpp"
#include "ensemblier/splits.hpp"
#include "ensemblier/types.hpp"

// Desk-scale stand-in for a fine-tuned CNN zoo: synthetic Gaussian-class
// tasks plus small trainable classifiers whose variation axes (model kind,
// activation, input transform, tuning schedule, snapshot epoch) emulate the
// diversity of the full-size zoo. Everything is a pure function of its seed.

namespace ensemblier::toylab {

// ---------------------------------------------------------------------------
// Synthetic tasks
// ---------------------------------------------------------------------------

struct SyntheticTaskSpec {
    std::string dataset_id;
    int n_classes = 0;
    int dim = 0;
    int n_samples = 0;
    std::vector<double> class_means; // C x dim
    double noise_scale = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_classes < 2) throw ValidationError("task '" + dataset_id + "': need >= 2 classes");
        if (dim < 1 || n_samples < 10 * n_classes)
            throw ValidationError("task '" + dataset_id + "': need dim >= 1 and n >= 10*C");
        if (class_means.size() != static_cast<std::size_t>(n_classes) *
                                      static_cast<std::size_t>(dim))
            throw ValidationError("task '" + dataset_id + "': class_means size mismatch");
        for (int a = 0; a < n_classes; ++a)
            for (int b = a + 1; b < n_classes; ++b) {
                bool distinct = false;
                for (int k = 0; k < dim; ++k)
                    if (class_means[static_cast<std::size_t>(a * dim + k)] !=
                        class_means[static_cast<std::size_t>(b * dim + k)]) {
                        distinct = true;
                        break;
                    }
                if (!distinct)
                    throw ValidationError("task '" + dataset_id + "': classes " +
                                          std::to_string(a) + " and " + std::to_string(b) +
                                          " share a mean");
            }
    }
};

struct ToyDataset {
    std::string dataset_id;
    int n_classes = 0;
    int dim = 0;
    std::vector<double> features; // n x dim
    std::vector<int> labels;

    std::size_t n() const { return labels.size(); }
    std::span<const double> sample(std::size_t t) const {
        return {features.data() + t * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }
};

/// Draw spec.n_samples points from per-class isotropic Gaussians with uniform
/// class priors. Deterministic in spec.seed.
inline ToyDataset gen_task(const SyntheticTaskSpec& spec) {
    spec.validate();
    ToyDataset data;
    data.dataset_id = spec.dataset_id;
    data.n_classes = spec.n_classes;
    data.dim = spec.dim;
    data.labels.reserve(static_cast<std::size_t>(spec.n_samples));
    data.features.reserve(static_cast<std::size_t>(spec.n_samples) *
                          static_cast<std::size_t>(spec.dim));
    Rng rng(mix_seed(spec.seed, std::string_view("gen_task"), fnv1a(spec.dataset_id)));
    for (int t = 0; t < spec.n_samples; ++t) {
        const int label = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.n_classes)));
        data.labels.push_back(label);
        const double* mean = spec.class_means.data() +
                             static_cast<std::size_t>(label) * static_cast<std::size_t>(spec.dim);
        for (int k = 0; k < spec.dim; ++k)
            data.features.push_back(mean[k] + spec.noise_scale * rng.next_gaussian());
    }
    return data;
}

/// Task spec with seeded Gaussian class means of scale mean_scale.
inline SyntheticTaskSpec make_task_spec(std::string dataset_id, int n_classes, int dim,
                                        int n_samples, double noise_scale, double mean_scale,
                                        std::uint64_t seed) {
    SyntheticTaskSpec spec;
    spec.dataset_id = std::move(dataset_id);
    spec.n_classes = n_classes;
    spec.dim = dim;
    spec.n_samples = n_samples;
    spec.noise_scale = noise_scale;
    spec.seed = seed;
    Rng rng(mix_seed(seed, std::string_view("means"), fnv1a(spec.dataset_id)));
    spec.class_means.resize(static_cast<std::size_t>(n_classes) * static_cast<std::size_t>(dim));
    for (auto& m : spec.class_means) m = mean_scale * rng.next_gaussian();
    spec.validate();
    return spec;
}

/// A related-domain variant of a task: same class layout with jittered means
/// and freshly drawn samples (the pre-tuning dataset of the two-round
/// schedule).
inline SyntheticTaskSpec related_task_spec(const SyntheticTaskSpec& target, double jitter,
                                           std::uint64_t seed) {
    SyntheticTaskSpec spec = target;
    spec.dataset_id = target.dataset_id + "-related";
    spec.seed = seed;
    Rng rng(mix_seed(seed, std::string_view("related-means"), fnv1a(target.dataset_id)));
    for (auto& m : spec.class_means) m += jitter * rng.next_gaussian();
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Toy models
// ---------------------------------------------------------------------------

inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

/// Scaled exponential linear unit.
inline double selu(double x) {
    return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * (std::exp(x) - 1.0);
}

inline double selu_derivative(double x) {
    return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

enum class ModelKind { Linear, Mlp1 };
enum class Activation { ReLU, SELU };

/// Linear classifier or one-hidden-layer MLP over dense features.
struct ToyModel {
    ModelKind kind = ModelKind::Linear;
    Activation activation = Activation::ReLU;
    int dim = 0;
    int hidden = 0; // Mlp1 only, >= 2
    int n_classes = 0;
    std::vector<double> w1, b1; // hidden x dim, hidden
    std::vector<double> w2, b2; // C x (hidden or dim), C

    static ToyModel make(ModelKind kind, Activation activation, int dim, int n_classes,
                         int hidden, std::uint64_t seed) {
        if (kind == ModelKind::Mlp1 && hidden < 2)
            throw ValidationError("toy model: Mlp1 hidden width must be >= 2");
        ToyModel m;
        m.kind = kind;
        m.activation = activation;
        m.dim = dim;
        m.hidden = kind == ModelKind::Mlp1 ? hidden : 0;
        m.n_classes = n_classes;
        Rng rng(mix_seed(seed, std::string_view("init")));
        auto init = [&rng](std::vector<double>& v, std::size_t count, int fan_in) {
            v.resize(count);
            const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (auto& x : v) x = scale * rng.next_gaussian();
        };
        if (kind == ModelKind::Mlp1) {
            init(m.w1, static_cast<std::size_t>(hidden) * static_cast<std::size_t>(dim), dim);
            m.b1.assign(static_cast<std::size_t>(hidden), 0.0);
            init(m.w2, static_cast<std::size_t>(n_classes) * static_cast<std::size_t>(hidden),
                 hidden);
        } else {
            init(m.w2, static_cast<std::size_t>(n_classes) * static_cast<std::size_t>(dim), dim);
        }
        m.b2.assign(static_cast<std::size_t>(n_classes), 0.0);
        return m;
    }

    double act(double x) const {
        return activation == Activation::ReLU ? (x > 0.0 ? x : 0.0) : selu(x);
    }
    double act_derivative(double x) const {
        return activation == Activation::ReLU ? (x > 0.0 ? 1.0 : 0.0) : selu_derivative(x);
    }

    void logits(std::span<const double> x, std::vector<double>& hidden_pre,
                std::vector<double>& out) const {
        out.assign(static_cast<std::size_t>(n_classes), 0.0);
        if (kind == ModelKind::Mlp1) {
            hidden_pre.assign(static_cast<std::size_t>(hidden), 0.0);
            for (int h = 0; h < hidden; ++h) {
                double z = b1[static_cast<std::size_t>(h)];
                const double* row = w1.data() + static_cast<std::size_t>(h) *
                                                    static_cast<std::size_t>(dim);
                for (int k = 0; k < dim; ++k) z += row[k] * x[static_cast<std::size_t>(k)];
                hidden_pre[static_cast<std::size_t>(h)] = z;
            }
            for (int c = 0; c < n_classes; ++c) {
                double z = b2[static_cast<std::size_t>(c)];
                const double* row = w2.data() + static_cast<std::size_t>(c) *
                                                    static_cast<std::size_t>(hidden);
                for (int h = 0; h < hidden; ++h)
                    z += row[h] * act(hidden_pre[static_cast<std::size_t>(h)]);
                out[static_cast<std::size_t>(c)] = z;
            }
        } else {
            for (int c = 0; c < n_classes; ++c) {
                double z = b2[static_cast<std::size_t>(c)];
                const double* row = w2.data() + static_cast<std::size_t>(c) *
                                                    static_cast<std::size_t>(dim);
                for (int k = 0; k < dim; ++k) z += row[k] * x[static_cast<std::size_t>(k)];
                out[static_cast<std::size_t>(c)] = z;
            }
        }
    }

    std::vector<double> logits(std::span<const double> x) const {
        std::vector<double> hidden_pre, out;
        logits(x, hidden_pre, out);
        return out;
    }

    bool finite() const {
        auto ok = [](const std::vector<double>& v) {
            return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
        };
        return ok(w1) && ok(b1) && ok(w2) && ok(b2);
    }

    bool operator==(const ToyModel&) const = default;
};

struct TrainConfig {
    int epochs = 30;
    double lr = 0.001;
    int batch = 32;
    int snapshot_every = 3;          // INC: harvest a model every 3 epochs...
    int total_snapshot_epochs = 45;  // ...over 45 epochs, 15 snapshots total
    std::uint64_t seed = 1;
};

namespace detail {

/// Minibatch-SGD epochs [epoch_begin, epoch_begin + n_epochs) of softmax
/// crossentropy. The shuffle stream is keyed on (seed, absolute epoch), so a
/// continued run is identical to one long run.
template <typename SnapshotSink>
void run_epochs(ToyModel& model, const ToyDataset& data, const TrainConfig& cfg,
                int epoch_begin, int n_epochs, SnapshotSink&& snapshot) {
    if (data.n_classes != model.n_classes || data.dim != model.dim)
        throw ValidationError("train: model and task dimensions disagree");
    const std::size_t n = data.n();
    std::vector<std::size_t> order(n);
    std::vector<double> probs, hidden_pre, delta_hidden;
    std::vector<double> gw1, gb1, gw2, gb2;

    for (int e = 0; e < n_epochs; ++e) {
        const int epoch = epoch_begin + e;
        std::iota(order.begin(), order.end(), 0);
        Rng rng(mix_seed(cfg.seed, std::string_view("epoch"),
                         static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);

        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch));
            gw1.assign(model.w1.size(), 0.0);
            gb1.assign(model.b1.size(), 0.0);
            gw2.assign(model.w2.size(), 0.0);
            gb2.assign(model.b2.size(), 0.0);
            for (std::size_t s = start; s < stop; ++s) {
                const std::size_t t = order[s];
                const auto x = data.sample(t);
                model.logits(x, hidden_pre, probs);
                // softmax in place
                const double m = *std::max_element(probs.begin(), probs.end());
                double sum = 0.0;
                for (auto& p : probs) {
                    p = std::exp(p - m);
                    sum += p;
                }
                for (auto& p : probs) p /= sum;
                probs[static_cast<std::size_t>(data.labels[t])] -= 1.0; // dL/dlogit

                if (model.kind == ModelKind::Mlp1) {
                    delta_hidden.assign(static_cast<std::size_t>(model.hidden), 0.0);
                    for (int c = 0; c < model.n_classes; ++c) {
                        const double d = probs[static_cast<std::size_t>(c)];
                        const std::size_t row = static_cast<std::size_t>(c) *
                                                static_cast<std::size_t>(model.hidden);
                        for (int h = 0; h < model.hidden; ++h) {
                            gw2[row + static_cast<std::size_t>(h)] +=
                                d * model.act(hidden_pre[static_cast<std::size_t>(h)]);
                            delta_hidden[static_cast<std::size_t>(h)] +=
                                d * model.w2[row + static_cast<std::size_t>(h)];
                        }
                        gb2[static_cast<std::size_t>(c)] += d;
                    }
                    for (int h = 0; h < model.hidden; ++h) {
                        const double d = delta_hidden[static_cast<std::size_t>(h)] *
                                         model.act_derivative(
                                             hidden_pre[static_cast<std::size_t>(h)]);
                        const std::size_t row = static_cast<std::size_t>(h) *
                                                static_cast<std::size_t>(model.dim);
                        for (int k = 0; k < model.dim; ++k)
                            gw1[row + static_cast<std::size_t>(k)] +=
                                d * x[static_cast<std::size_t>(k)];
                        gb1[static_cast<std::size_t>(h)] += d;
                    }
                } else {
                    for (int c = 0; c < model.n_classes; ++c) {
                        const double d = probs[static_cast<std::size_t>(c)];
                        const std::size_t row = static_cast<std::size_t>(c) *
                                                static_cast<std::size_t>(model.dim);
                        for (int k = 0; k < model.dim; ++k)
                            gw2[row + static_cast<std::size_t>(k)] +=
                                d * x[static_cast<std::size_t>(k)];
                        gb2[static_cast<std::size_t>(c)] += d;
                    }
                }
            }
            const double step = cfg.lr / static_cast<double>(stop - start);
            for (std::size_t i = 0; i < model.w1.size(); ++i) model.w1[i] -= step * gw1[i];
            for (std::size_t i = 0; i < model.b1.size(); ++i) model.b1[i] -= step * gb1[i];
            for (std::size_t i = 0; i < model.w2.size(); ++i) model.w2[i] -= step * gw2[i];
            for (std::size_t i = 0; i < model.b2.size(); ++i) model.b2[i] -= step * gb2[i];
        }
        if (!model.finite())
            throw DivergenceError("toy training diverged at epoch " + std::to_string(epoch + 1));
        snapshot(epoch + 1, model);
    }
}

inline void no_snapshot(int, const ToyModel&) {}

} // namespace detail

/// One-round tuning: cfg.epochs of minibatch SGD.
inline ToyModel train(ToyModel model, const ToyDataset& data, const TrainConfig& cfg) {
    detail::run_epochs(model, data, cfg, 0, cfg.epochs, detail::no_snapshot);
    return model;
}

/// Incremental tuning: snapshots after every snapshot_every epochs across
/// total_snapshot_epochs (15 snapshots with the defaults). Snapshot epochs
/// are counted from the start of the incremental phase; epoch_begin shifts
/// the shuffle stream so the phase can continue a previous run. Returns pairs
/// of (phase epoch, model copy).
inline std::vector<std::pair<int, ToyModel>> train_snapshots(ToyModel model,
                                                             const ToyDataset& data,
                                                             const TrainConfig& cfg,
                                                             int epoch_begin = 0) {
    if (cfg.snapshot_every < 1 || cfg.total_snapshot_epochs < cfg.snapshot_every)
        throw ValidationError("train_snapshots: bad snapshot schedule");
    std::vector<std::pair<int, ToyModel>> snapshots;
    detail::run_epochs(model, data, cfg, epoch_begin, cfg.total_snapshot_epochs,
                       [&](int epoch, const ToyModel& m) {
                           const int phase_epoch = epoch - epoch_begin;
                           if (phase_epoch % cfg.snapshot_every == 0)
                               snapshots.emplace_back(phase_epoch, m);
                       });
    return snapshots;
}

/// Two-round tuning: cfg.epochs on the related task, then cfg.epochs more on
/// the target. The epoch stream continues across rounds, so with
/// related == target this is exactly one run of 2*cfg.epochs.
inline ToyModel two_round_train(ToyModel model, const ToyDataset& related,
                                const ToyDataset& target, const TrainConfig& cfg) {
    if (related.dim != target.dim)
        throw ValidationError("two_round_train: related and target dims differ");
    detail::run_epochs(model, related, cfg, 0, cfg.epochs, detail::no_snapshot);
    detail::run_epochs(model, target, cfg, cfg.epochs, cfg.epochs, detail::no_snapshot);
    return model;
}

// ---------------------------------------------------------------------------
// Input transforms (the resize-strategy analogue for feature vectors)
// ---------------------------------------------------------------------------

enum class FeatureTransform { A, B };

namespace detail {

/// Fixed orthonormal matrix for transform B, generated once per dimension
/// from a constant seed (Gram-Schmidt over Gaussian draws).
inline std::vector<double> rotation_matrix(int dim) {
    Rng rng(mix_seed(0x7f4a7c15u, std::string_view("transform-b"),
                     static_cast<std::uint64_t>(dim)));
    std::vector<double> m(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim));
    for (auto& v : m) v = rng.next_gaussian();
    for (int r = 0; r < dim; ++r) {
        double* row = m.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(dim);
        for (int prev = 0; prev < r; ++prev) {
            const double* prow =
                m.data() + static_cast<std::size_t>(prev) * static_cast<std::size_t>(dim);
            double dot = 0.0;
            for (int k = 0; k < dim; ++k) dot += row[k] * prow[k];
            for (int k = 0; k < dim; ++k) row[k] -= dot * prow[k];
        }
        double norm = 0.0;
        for (int k = 0; k < dim; ++k) norm += row[k] * row[k];
        norm = std::sqrt(norm);
        for (int k = 0; k < dim; ++k) row[k] /= norm;
    }
    return m;
}

} // namespace detail

/// A is the identity; B applies an elementwise signed power warp followed by
/// a fixed rotation and alternating rescaling. Both maps are invertible, but
/// B is nonlinear, so models trained on the two representations converge to
/// genuinely different decision functions (the point of the two-resize axis).
inline ToyDataset apply_transform(const ToyDataset& data, FeatureTransform transform) {
    if (transform == FeatureTransform::A) return data;
    ToyDataset out = data;
    const auto rot = detail::rotation_matrix(data.dim);
    std::vector<double> warped(static_cast<std::size_t>(data.dim));
    std::vector<double> tmp(static_cast<std::size_t>(data.dim));
    for (std::size_t t = 0; t < data.n(); ++t) {
        const auto x = data.sample(t);
        for (int k = 0; k < data.dim; ++k) {
            const double v = x[static_cast<std::size_t>(k)];
            warped[static_cast<std::size_t>(k)] =
                (v >= 0.0 ? 2.0 : -2.0) * std::pow(std::abs(v), 0.7);
        }
        for (int r = 0; r < data.dim; ++r) {
            const double* row =
                rot.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(data.dim);
            double z = 0.0;
            for (int k = 0; k < data.dim; ++k) z += row[k] * warped[static_cast<std::size_t>(k)];
            tmp[static_cast<std::size_t>(r)] = (r % 2 == 0 ? 1.5 : 0.65) * z;
        }
        std::copy(tmp.begin(), tmp.end(),
                  out.features.begin() + static_cast<std::ptrdiff_t>(
                                             t * static_cast<std::size_t>(data.dim)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Zoo construction
// ---------------------------------------------------------------------------

/// Which variant axes the zoo build enables.
struct GridSpec {
    bool linear = true;
    bool mlp = true;
    bool two_round = true;
    bool selu = true;        // SELU variant exists for the MLP only
    bool incremental = true;
    bool both_transforms = true;
    int hidden = 10;

    static GridSpec defaults() { return {}; }
    static GridSpec minimal() {
        GridSpec g;
        g.mlp = false;
        g.two_round = false;
        g.selu = false;
        g.incremental = false;
        g.both_transforms = false;
        return g;
    }

    /// Closed-form member count per (dataset, split).
    int entries_per_split() const {
        const int kinds = (linear ? 1 : 0) + (mlp ? 1 : 0);
        const int transforms = both_transforms ? 2 : 1;
        int count = kinds * transforms;                       // 1R
        if (two_round) count += kinds * transforms;           // 2R
        if (selu && mlp) count += transforms;                 // SELU
        if (incremental) count += kinds * transforms * 15;    // INC snapshots
        return count;
    }
};

struct ToySuiteConfig {
    std::uint64_t seed = 17;
    int n_datasets = 5;
    GridSpec grid = GridSpec::defaults();
    // feature magnitudes tuned so the default learning rate trains both model
    // kinds into the diverse-but-imperfect regime the ensemble study needs
    double noise_scale = 5.5;
    double mean_scale = 8.0;
    double related_jitter = 8.0;
};

/// The five default toy tasks; class counts differ on purpose so downstream
/// protocols must handle heterogeneous datasets.
inline std::vector<SyntheticTaskSpec> default_task_specs(const ToySuiteConfig& cfg) {
    struct Shape {
        const char* id;
        int n_classes;
        int n_samples;
        double separation; // per-task mean-scale factor
    };
    static constexpr Shape shapes[] = {
        {"toyA", 6, 1100, 1.0},  {"toyB", 5, 1000, 1.0}, {"toyC", 8, 1200, 1.15},
        {"toyD", 4, 900, 1.0},   {"toyE", 7, 1100, 1.05},
    };
    if (cfg.n_datasets < 1 || cfg.n_datasets > 5)
        throw ValidationError("toy suite supports 1..5 datasets");
    std::vector<SyntheticTaskSpec> specs;
    for (int i = 0; i < cfg.n_datasets; ++i)
        specs.push_back(make_task_spec(shapes[i].id, shapes[i].n_classes, 10,
                                       shapes[i].n_samples, cfg.noise_scale,
                                       cfg.mean_scale * shapes[i].separation,
                                       mix_seed(cfg.seed, std::string_view("task"),
                                                static_cast<std::uint64_t>(i))));
    return specs;
}

namespace detail {

struct Variant {
    std::string base_id; // without the INC epoch suffix
    ModelKind kind = ModelKind::Linear;
    Activation activation = Activation::ReLU;
    FeatureTransform transform = FeatureTransform::A;
    Tuning tuning = Tuning::OneRound;
};

inline std::vector<Variant> grid_variants(const GridSpec& grid) {
    std::vector<Variant> variants;
    std::vector<ModelKind> kinds;
    if (grid.linear) kinds.push_back(ModelKind::Linear);
    if (grid.mlp) kinds.push_back(ModelKind::Mlp1);
    std::vector<FeatureTransform> transforms{FeatureTransform::A};
    if (grid.both_transforms) transforms.push_back(FeatureTransform::B);

    auto name = [](ModelKind k, FeatureTransform tr, const char* tag) {
        std::string s = "toy-";
        s += k == ModelKind::Linear ? "lin" : "mlp";
        s += tr == FeatureTransform::A ? "-sqr-" : "-pad-";
        s += tag;
        return s;
    };

    for (auto k : kinds)
        for (auto tr : transforms) {
            variants.push_back({name(k, tr, "1R"), k, Activation::ReLU, tr, Tuning::OneRound});
            if (grid.two_round)
                variants.push_back({name(k, tr, "2R"), k, Activation::ReLU, tr,
                                    Tuning::TwoRound});
            if (grid.incremental)
                variants.push_back({name(k, tr, "INC"), k, Activation::ReLU, tr,
                                    Tuning::Incremental});
        }
    if (grid.selu && grid.mlp)
        for (auto tr : transforms)
            variants.push_back({name(ModelKind::Mlp1, tr, "SELU"), ModelKind::Mlp1,
                                Activation::SELU, tr, Tuning::Selu});
    return variants;
}

inline ResizeStrategy resize_tag(FeatureTransform tr) {
    return tr == FeatureTransform::A ? ResizeStrategy::SqR : ResizeStrategy::Pad;
}

inline std::string epoch_suffix(int epoch) {
    return epoch < 10 ? "-e0" + std::to_string(epoch) : "-e" + std::to_string(epoch);
}

} // namespace detail

/// Train every grid variant on every dataset split and export score files
/// plus the manifest (written to out_dir/manifest.json). Scores are raw
/// logits; normalization stays an explicit downstream step.
inline Manifest build_toy_zoo(const std::filesystem::path& out_dir, const ToySuiteConfig& cfg) {
    const auto specs = default_task_specs(cfg);
    const auto variants = detail::grid_variants(cfg.grid);
    if (variants.empty()) throw ValidationError("toy zoo grid enables no variants");

    Manifest manifest;
    manifest.zoo_root = out_dir;

    struct DatasetResult {
        std::string dataset_id;
        std::vector<std::string> class_names;
        std::vector<std::pair<ManifestEntry, ScoreMatrix>> outputs;
    };
    std::vector<DatasetResult> results(specs.size());

    parallel_for(specs.size(), [&](std::size_t di) {
        const auto& spec = specs[di];
        DatasetResult& res = results[di];
        res.dataset_id = spec.dataset_id;
        res.class_names = ClassMap::of_size(spec.n_classes).names();

        const ToyDataset raw = gen_task(spec);
        const ToyDataset related_raw = gen_task(related_task_spec(
            spec, cfg.related_jitter,
            mix_seed(cfg.seed, std::string_view("related"), static_cast<std::uint64_t>(di))));
        const auto protocol = ProtocolSpec::half_split(spec.dataset_id, spec.n_classes);
        const auto splits = make_splits(spec.n_samples, protocol, cfg.seed);

        // Transform once per representation, reuse across variants.
        const ToyDataset views[2] = {apply_transform(raw, FeatureTransform::A),
                                     apply_transform(raw, FeatureTransform::B)};
        const ToyDataset related_views[2] = {
            apply_transform(related_raw, FeatureTransform::A),
            apply_transform(related_raw, FeatureTransform::B)};

        auto subset = [](const ToyDataset& src, const std::vector<int>& idx) {
            ToyDataset out;
            out.dataset_id = src.dataset_id;
            out.n_classes = src.n_classes;
            out.dim = src.dim;
            for (int t : idx) {
                out.labels.push_back(src.labels[static_cast<std::size_t>(t)]);
                const auto x = src.sample(static_cast<std::size_t>(t));
                out.features.insert(out.features.end(), x.begin(), x.end());
            }
            return out;
        };

        for (std::size_t si = 0; si < splits.size(); ++si) {
            const auto& split = splits[si];
            const std::string split_id = split.split_id + "/test";

            for (const auto& variant : variants) {
                const auto view_idx = variant.transform == FeatureTransform::A ? 0 : 1;
                const ToyDataset train_data = subset(views[view_idx], split.train);
                const ToyDataset test_data = subset(views[view_idx], split.test);

                TrainConfig tc;
                tc.batch = variant.kind == ModelKind::Mlp1 ? 8 : 32;
                tc.seed = mix_seed(cfg.seed, std::string_view("train"),
                                   static_cast<std::uint64_t>(di), fnv1a(variant.base_id),
                                   static_cast<std::uint64_t>(si));
                ToyModel model = ToyModel::make(variant.kind, variant.activation, spec.dim,
                                                spec.n_classes, cfg.grid.hidden, tc.seed);

                auto score = [&](const ToyModel& m, std::string classifier_id,
                                 std::optional<int> epoch_tag) {
                    ScoreMatrix sm;
                    sm.classifier_id = classifier_id;
                    sm.dataset_id = spec.dataset_id;
                    sm.split_id = split_id;
                    sm.n_classes = spec.n_classes;
                    for (std::size_t t = 0; t < test_data.n(); ++t) {
                        const int orig = split.test[t];
                        std::string sid = "s" + std::to_string(orig);
                        sm.sample_ids.push_back(std::move(sid));
                        sm.labels.push_back(test_data.labels[t]);
                        const auto z = m.logits(test_data.sample(t));
                        sm.scores.insert(sm.scores.end(), z.begin(), z.end());
                    }
                    ManifestEntry entry;
                    entry.record.classifier_id = classifier_id;
                    entry.record.architecture = Architecture::Toy;
                    entry.record.tuning = variant.tuning;
                    entry.record.resize = detail::resize_tag(variant.transform);
                    entry.record.epoch_tag = epoch_tag;
                    entry.dataset_id = spec.dataset_id;
                    entry.split_id = split_id;
                    entry.path = spec.dataset_id + "/" + split_id + "/" + classifier_id + ".csv";
                    res.outputs.emplace_back(std::move(entry), std::move(sm));
                };

                switch (variant.tuning) {
                    case Tuning::OneRound:
                    case Tuning::Selu:
                        score(train(std::move(model), train_data, tc), variant.base_id,
                              std::nullopt);
                        break;
                    case Tuning::TwoRound:
                        score(two_round_train(std::move(model), related_views[view_idx],
                                              train_data, tc),
                              variant.base_id, std::nullopt);
                        break;
                    case Tuning::Incremental: {
                        // incremental tuning continues from a one-round-tuned
                        // model, harvesting a member every few epochs
                        model = train(std::move(model), train_data, tc);
                        const auto snapshots =
                            train_snapshots(std::move(model), train_data, tc, tc.epochs);
                        for (const auto& [epoch, snap] : snapshots)
                            score(snap, variant.base_id + detail::epoch_suffix(epoch), epoch);
                        break;
                    }
                }
            }
        }
    });

    for (auto& res : results) {
        manifest.per_dataset_classes[res.dataset_id] = res.class_names;
        for (auto& [entry, sm] : res.outputs) {
            save_scores(sm, out_dir / entry.path);
            manifest.entries.push_back(entry);
        }
    }
    manifest.check_no_duplicates();
    // the manifest lives inside the zoo, so the stored root is "."
    Manifest on_disk = manifest;
    on_disk.zoo_root = ".";
    on_disk.save(out_dir / "manifest.json");
    return manifest;
}

/// Task CSVs (sample_id,label,f0..f{d-1}) for inspection or external tools.
inline void write_task_csv(const ToyDataset& data, const std::filesystem::path& path) {
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write task file '" + path.string() + "'");
    out << "sample_id,label";
    for (int k = 0; k < data.dim; ++k) out << ",f" << k;
    out << "\n";
    for (std::size_t t = 0; t < data.n(); ++t) {
        out << 's' << t << ',' << data.labels[t];
        const auto x = data.sample(t);
        for (double v : x) out << ',' << format_double(v);
        out << "\n";
    }
}

} // namespace ensemblier::toylab
