#pragma once

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ensemblier/manifest.hpp"
#include "ensemblier/rng.hpp"
#include "ensemblier/score_io.hpp"
#include "ensemblier/types.hpp"

namespace helpers {

/// Fresh directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        for (int attempt = 0;; ++attempt) {
            path_ = base / ("ensemblier-" + tag + "-" + std::to_string(::getpid()) + "-" +
                            std::to_string(attempt));
            if (!std::filesystem::exists(path_)) break;
        }
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline ensemblier::ScoreMatrix random_scores(const std::string& classifier_id,
                                             const std::string& dataset_id,
                                             const std::string& split_id, std::size_t n_rows,
                                             int n_classes, ensemblier::Rng& rng,
                                             const std::vector<int>* fixed_labels = nullptr) {
    ensemblier::ScoreMatrix sm;
    sm.classifier_id = classifier_id;
    sm.dataset_id = dataset_id;
    sm.split_id = split_id;
    sm.n_classes = n_classes;
    for (std::size_t t = 0; t < n_rows; ++t) {
        sm.sample_ids.push_back("s" + std::to_string(t));
        sm.labels.push_back(fixed_labels
                                ? (*fixed_labels)[t]
                                : static_cast<int>(rng.next_below(
                                      static_cast<std::uint64_t>(n_classes))));
        for (int c = 0; c < n_classes; ++c)
            sm.scores.push_back(4.0 * rng.next_double() - 2.0);
    }
    return sm;
}

/// Row-normalize in place to a probability row (test-side, independent of
/// fusion::normalize_rows).
inline void softmax_rows(ensemblier::ScoreMatrix& sm) {
    for (std::size_t t = 0; t < sm.n_rows(); ++t) {
        auto row = sm.row(t);
        double m = row[0];
        for (double v : row) m = std::max(m, v);
        double sum = 0.0;
        for (auto& v : row) {
            v = std::exp(v - m);
            sum += v;
        }
        for (auto& v : row) v /= sum;
    }
}

struct MiniZooMember {
    std::string classifier_id;
    ensemblier::Architecture architecture = ensemblier::Architecture::Toy;
    ensemblier::Tuning tuning = ensemblier::Tuning::OneRound;
    ensemblier::ResizeStrategy resize = ensemblier::ResizeStrategy::SqR;
};

/// Write a one-dataset zoo of random score files and its manifest; returns
/// the manifest path.
inline std::filesystem::path write_mini_zoo(const std::filesystem::path& root,
                                            const std::vector<MiniZooMember>& members,
                                            std::size_t n_rows, int n_classes,
                                            std::uint64_t seed,
                                            const std::string& dataset_id = "mini",
                                            const std::string& split_id = "half/test") {
    ensemblier::Rng rng(seed);
    std::vector<int> labels;
    for (std::size_t t = 0; t < n_rows; ++t)
        labels.push_back(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_classes))));

    ensemblier::Manifest manifest;
    manifest.zoo_root = root;
    manifest.shared_classes = ensemblier::ClassMap::of_size(n_classes).names();
    for (const auto& m : members) {
        auto sm = random_scores(m.classifier_id, dataset_id, split_id, n_rows, n_classes, rng,
                                &labels);
        const std::string rel = dataset_id + "/" + m.classifier_id + ".csv";
        ensemblier::save_scores(sm, root / rel);
        ensemblier::ManifestEntry entry;
        entry.record.classifier_id = m.classifier_id;
        entry.record.architecture = m.architecture;
        entry.record.tuning = m.tuning;
        entry.record.resize = m.resize;
        entry.dataset_id = dataset_id;
        entry.split_id = split_id;
        entry.path = rel;
        manifest.entries.push_back(std::move(entry));
    }
    const auto manifest_path = root / "manifest.json";
    manifest.save(manifest_path);
    return manifest_path;
}

} // namespace helpers
