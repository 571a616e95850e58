#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ensemblier/errors.hpp"

namespace ensemblier {

/// Ordered class names with a name -> contiguous 0-based index lookup.
class ClassMap {
public:
    ClassMap() = default;

    static ClassMap from_names(std::vector<std::string> names) {
        if (names.size() < 2)
            throw ValidationError("class map needs at least 2 classes, got " +
                                  std::to_string(names.size()));
        ClassMap m;
        m.names_ = std::move(names);
        for (std::size_t i = 0; i < m.names_.size(); ++i) {
            auto [it, inserted] = m.index_.emplace(m.names_[i], static_cast<int>(i));
            if (!inserted)
                throw ValidationError("duplicate class name '" + m.names_[i] + "'");
        }
        return m;
    }

    /// Generic names c0..c{C-1}.
    static ClassMap of_size(int n_classes) {
        std::vector<std::string> names;
        names.reserve(static_cast<std::size_t>(n_classes));
        for (int c = 0; c < n_classes; ++c) names.push_back("c" + std::to_string(c));
        return from_names(std::move(names));
    }

    int size() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(int idx) const { return names_.at(static_cast<std::size_t>(idx)); }

    int index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ValidationError("unknown class name '" + name + "'");
        return it->second;
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
};

enum class Architecture {
    AlexNet,
    GoogleNet,
    InceptionV3,
    Vgg16,
    Vgg19,
    ResNet50,
    ResNet101,
    DenseNet,
    MobileNetV2,
    NasNet,
    Toy,
};

enum class Tuning { OneRound, TwoRound, Incremental, Selu };

enum class ResizeStrategy { SqR, Pad, Tile, None };

inline std::string to_string(Architecture a) {
    switch (a) {
        case Architecture::AlexNet: return "AlexNet";
        case Architecture::GoogleNet: return "GoogleNet";
        case Architecture::InceptionV3: return "InceptionV3";
        case Architecture::Vgg16: return "VGG16";
        case Architecture::Vgg19: return "VGG19";
        case Architecture::ResNet50: return "ResNet50";
        case Architecture::ResNet101: return "ResNet101";
        case Architecture::DenseNet: return "DenseNet";
        case Architecture::MobileNetV2: return "MobileNetV2";
        case Architecture::NasNet: return "NasNet";
        case Architecture::Toy: return "Toy";
    }
    return "?";
}

inline Architecture parse_architecture(const std::string& s) {
    static const std::unordered_map<std::string, Architecture> table{
        {"AlexNet", Architecture::AlexNet},       {"GoogleNet", Architecture::GoogleNet},
        {"InceptionV3", Architecture::InceptionV3}, {"VGG16", Architecture::Vgg16},
        {"VGG19", Architecture::Vgg19},           {"ResNet50", Architecture::ResNet50},
        {"ResNet101", Architecture::ResNet101},   {"DenseNet", Architecture::DenseNet},
        {"MobileNetV2", Architecture::MobileNetV2}, {"NasNet", Architecture::NasNet},
        {"Toy", Architecture::Toy},
    };
    auto it = table.find(s);
    if (it == table.end()) throw FormatError("unknown architecture '" + s + "'");
    return it->second;
}

inline std::string to_string(Tuning t) {
    switch (t) {
        case Tuning::OneRound: return "1R";
        case Tuning::TwoRound: return "2R";
        case Tuning::Incremental: return "INC";
        case Tuning::Selu: return "SELU";
    }
    return "?";
}

inline Tuning parse_tuning(const std::string& s) {
    if (s == "1R") return Tuning::OneRound;
    if (s == "2R") return Tuning::TwoRound;
    if (s == "INC") return Tuning::Incremental;
    if (s == "SELU") return Tuning::Selu;
    throw FormatError("unknown tuning '" + s + "'");
}

inline std::string to_string(ResizeStrategy r) {
    switch (r) {
        case ResizeStrategy::SqR: return "SqR";
        case ResizeStrategy::Pad: return "Pad";
        case ResizeStrategy::Tile: return "Tile";
        case ResizeStrategy::None: return "None";
    }
    return "?";
}

inline ResizeStrategy parse_resize(const std::string& s) {
    if (s == "SqR") return ResizeStrategy::SqR;
    if (s == "Pad") return ResizeStrategy::Pad;
    if (s == "Tile") return ResizeStrategy::Tile;
    if (s == "None") return ResizeStrategy::None;
    throw FormatError("unknown resize strategy '" + s + "'");
}

/// Identity of one zoo member. classifier_id is the cross-dataset key; the
/// descriptive fields drive recipe filters.
struct ClassifierRecord {
    std::string classifier_id;
    Architecture architecture = Architecture::Toy;
    Tuning tuning = Tuning::OneRound;
    ResizeStrategy resize = ResizeStrategy::None;
    std::optional<int> epoch_tag;
};

/// One classifier's class scores for every sample of one dataset split.
/// Scores are row-major N x C and are raw classifier outputs unless a
/// normalization step has been applied explicitly.
struct ScoreMatrix {
    std::string classifier_id;
    std::string dataset_id;
    std::string split_id;
    std::vector<std::string> sample_ids;
    std::vector<int> labels;
    int n_classes = 0;
    std::vector<double> scores;

    std::size_t n_rows() const { return labels.size(); }

    double at(std::size_t row, int cls) const {
        return scores[row * static_cast<std::size_t>(n_classes) + static_cast<std::size_t>(cls)];
    }
    double& at(std::size_t row, int cls) {
        return scores[row * static_cast<std::size_t>(n_classes) + static_cast<std::size_t>(cls)];
    }
    std::span<const double> row(std::size_t r) const {
        return {scores.data() + r * static_cast<std::size_t>(n_classes),
                static_cast<std::size_t>(n_classes)};
    }
    std::span<double> row(std::size_t r) {
        return {scores.data() + r * static_cast<std::size_t>(n_classes),
                static_cast<std::size_t>(n_classes)};
    }

    /// Enforce structural invariants; throws ValidationError.
    void validate() const {
        if (n_classes < 2)
            throw ValidationError("score matrix '" + classifier_id + "': needs >= 2 classes");
        if (sample_ids.size() != labels.size())
            throw ValidationError("score matrix '" + classifier_id +
                                  "': sample_ids/labels size mismatch");
        if (scores.size() != labels.size() * static_cast<std::size_t>(n_classes))
            throw ValidationError("score matrix '" + classifier_id + "': score storage size " +
                                  std::to_string(scores.size()) + " != N*C");
        for (std::size_t t = 0; t < labels.size(); ++t) {
            if (labels[t] < 0 || labels[t] >= n_classes)
                throw ValidationError("score matrix '" + classifier_id + "': label " +
                                      std::to_string(labels[t]) + " out of range at row " +
                                      std::to_string(t + 1));
        }
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (!std::isfinite(scores[i]))
                throw ValidationError("score matrix '" + classifier_id +
                                      "': non-finite score at row " +
                                      std::to_string(i / static_cast<std::size_t>(n_classes) + 1));
        }
    }

    /// True when the two matrices cover the same samples of the same split.
    bool aligned_with(const ScoreMatrix& other) const {
        return dataset_id == other.dataset_id && split_id == other.split_id &&
               n_classes == other.n_classes && sample_ids == other.sample_ids &&
               labels == other.labels;
    }
};

} // namespace ensemblier
