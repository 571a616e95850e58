#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ensemblier/errors.hpp"
#include "ensemblier/parallel.hpp"
#include "ensemblier/score_io.hpp"
#include "ensemblier/types.hpp"

namespace ensemblier {

struct ManifestEntry {
    ClassifierRecord record;
    std::string dataset_id;
    std::string split_id;
    std::string path; // relative to zoo_root
};

/// Zoo index: class names plus one entry per (classifier, dataset, split)
/// score file. `classes` is either one list shared by every dataset or a
/// per-dataset map (datasets in a zoo may have different class counts).
struct Manifest {
    std::filesystem::path zoo_root;
    std::vector<std::string> shared_classes;                     // used when per_dataset empty
    std::map<std::string, std::vector<std::string>> per_dataset_classes;
    std::vector<ManifestEntry> entries;

    ClassMap classes_for(const std::string& dataset_id) const {
        if (!per_dataset_classes.empty()) {
            auto it = per_dataset_classes.find(dataset_id);
            if (it == per_dataset_classes.end())
                throw ValidationError("manifest has no class list for dataset '" + dataset_id +
                                      "'");
            return ClassMap::from_names(it->second);
        }
        return ClassMap::from_names(shared_classes);
    }

    std::vector<std::string> dataset_ids() const {
        std::set<std::string> seen;
        std::vector<std::string> out;
        for (const auto& e : entries)
            if (seen.insert(e.dataset_id).second) out.push_back(e.dataset_id);
        return out;
    }

    void check_no_duplicates() const {
        std::set<std::array<std::string, 3>> keys;
        for (const auto& e : entries) {
            if (!keys.insert({e.record.classifier_id, e.dataset_id, e.split_id}).second)
                throw ValidationError("duplicate manifest entry (" + e.record.classifier_id +
                                      ", " + e.dataset_id + ", " + e.split_id + ")");
        }
    }

    static Manifest load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file) const;
};

inline Manifest Manifest::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open manifest '" + file.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest '" + file.string() + "': " + e.what());
    }

    Manifest m;
    try {
        m.zoo_root = j.at("zoo_root").get<std::string>();
        if (m.zoo_root.is_relative()) m.zoo_root = file.parent_path() / m.zoo_root;
        const auto& classes = j.at("classes");
        if (classes.is_array()) {
            m.shared_classes = classes.get<std::vector<std::string>>();
        } else {
            for (auto it = classes.begin(); it != classes.end(); ++it)
                m.per_dataset_classes[it.key()] = it.value().get<std::vector<std::string>>();
        }
        for (const auto& je : j.at("entries")) {
            ManifestEntry e;
            e.record.classifier_id = je.at("classifier_id").get<std::string>();
            e.record.architecture = parse_architecture(je.at("architecture").get<std::string>());
            e.record.tuning = parse_tuning(je.at("tuning").get<std::string>());
            e.record.resize = parse_resize(je.at("resize").get<std::string>());
            if (je.contains("epoch_tag") && !je.at("epoch_tag").is_null())
                e.record.epoch_tag = je.at("epoch_tag").get<int>();
            e.dataset_id = je.at("dataset_id").get<std::string>();
            e.split_id = je.at("split_id").get<std::string>();
            e.path = je.at("path").get<std::string>();
            m.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest '" + file.string() + "': " + e.what());
    }
    m.check_no_duplicates();
    return m;
}

inline void Manifest::save(const std::filesystem::path& file) const {
    nlohmann::ordered_json j;
    j["zoo_root"] = zoo_root.string();
    if (!per_dataset_classes.empty()) {
        nlohmann::ordered_json classes;
        for (const auto& [dataset, names] : per_dataset_classes) classes[dataset] = names;
        j["classes"] = classes;
    } else {
        j["classes"] = shared_classes;
    }
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        nlohmann::ordered_json je;
        je["classifier_id"] = e.record.classifier_id;
        je["architecture"] = to_string(e.record.architecture);
        je["tuning"] = to_string(e.record.tuning);
        je["resize"] = to_string(e.record.resize);
        je["epoch_tag"] = e.record.epoch_tag ? nlohmann::ordered_json(*e.record.epoch_tag)
                                             : nlohmann::ordered_json(nullptr);
        je["dataset_id"] = e.dataset_id;
        je["split_id"] = e.split_id;
        je["path"] = e.path;
        j["entries"].push_back(std::move(je));
    }
    if (!file.parent_path().empty()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error("cannot write manifest '" + file.string() + "'");
    out << j.dump(2) << "\n";
}

/// Read-through loader for manifest entries.
class Zoo {
public:
    explicit Zoo(Manifest manifest) : manifest_(std::move(manifest)) {
        manifest_.check_no_duplicates();
    }

    const Manifest& manifest() const { return manifest_; }

    ScoreMatrix load(const ManifestEntry& entry) const {
        ScoreMatrix sm =
            load_scores(manifest_.zoo_root / entry.path, manifest_.classes_for(entry.dataset_id));
        sm.classifier_id = entry.record.classifier_id;
        sm.dataset_id = entry.dataset_id;
        sm.split_id = entry.split_id;
        sm.validate();
        return sm;
    }

    template <typename Pred>
    std::vector<const ManifestEntry*> select(Pred&& pred) const {
        std::vector<const ManifestEntry*> out;
        for (const auto& e : manifest_.entries)
            if (pred(e)) out.push_back(&e);
        return out;
    }

private:
    Manifest manifest_;
};

struct EntryCheck {
    std::size_t entry_index = 0;
    bool ok = true;
    std::string message; // "OK" or the error
};

struct ValidationReport {
    std::vector<EntryCheck> entries;
    std::vector<std::string> cross_errors;

    bool all_ok() const {
        if (!cross_errors.empty()) return false;
        for (const auto& e : entries)
            if (!e.ok) return false;
        return true;
    }
};

/// Per-entry load check plus a cross-check that all entries of one
/// (dataset, split) agree on sample count, sample ids and labels. Problems
/// are report content, not exceptions.
inline ValidationReport validate_zoo(const Manifest& manifest) {
    ValidationReport report;
    report.entries.resize(manifest.entries.size());
    std::vector<std::optional<ScoreMatrix>> loaded(manifest.entries.size());

    Zoo zoo(manifest);
    parallel_for(manifest.entries.size(), [&](std::size_t i) {
        report.entries[i].entry_index = i;
        try {
            loaded[i] = zoo.load(manifest.entries[i]);
            report.entries[i].ok = true;
            report.entries[i].message = "OK";
        } catch (const std::exception& e) {
            report.entries[i].ok = false;
            report.entries[i].message = e.what();
        }
    });

    // Reference alignment per (dataset, split) is the first loadable entry.
    std::map<std::pair<std::string, std::string>, std::size_t> reference;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        if (!loaded[i]) continue;
        const auto& e = manifest.entries[i];
        auto key = std::make_pair(e.dataset_id, e.split_id);
        auto [it, inserted] = reference.emplace(key, i);
        if (inserted) continue;
        const ScoreMatrix& ref = *loaded[it->second];
        const ScoreMatrix& cur = *loaded[i];
        if (cur.n_rows() != ref.n_rows())
            report.cross_errors.push_back(
                "(" + e.dataset_id + ", " + e.split_id + "): '" + e.record.classifier_id +
                "' has " + std::to_string(cur.n_rows()) + " rows, expected " +
                std::to_string(ref.n_rows()) + " from '" +
                manifest.entries[it->second].record.classifier_id + "'");
        else if (cur.sample_ids != ref.sample_ids)
            report.cross_errors.push_back("(" + e.dataset_id + ", " + e.split_id + "): '" +
                                          e.record.classifier_id + "' sample ids differ from '" +
                                          manifest.entries[it->second].record.classifier_id +
                                          "'");
        else if (cur.labels != ref.labels)
            report.cross_errors.push_back("(" + e.dataset_id + ", " + e.split_id + "): '" +
                                          e.record.classifier_id + "' labels differ from '" +
                                          manifest.entries[it->second].record.classifier_id +
                                          "'");
    }
    return report;
}

} // namespace ensemblier
