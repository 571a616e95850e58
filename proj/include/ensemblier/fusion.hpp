#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ensemblier/errors.hpp"
#include "ensemblier/manifest.hpp"
#include "ensemblier/types.hpp"

namespace ensemblier::fusion {

enum class Normalization { Softmax, RowSum, None };

inline std::string to_string(Normalization n) {
    switch (n) {
        case Normalization::Softmax: return "softmax";
        case Normalization::RowSum: return "rowsum";
        case Normalization::None: return "none";
    }
    return "?";
}

inline Normalization parse_normalization(const std::string& s) {
    if (s == "softmax") return Normalization::Softmax;
    if (s == "rowsum") return Normalization::RowSum;
    if (s == "none") return Normalization::None;
    throw FormatError("unknown normalization '" + s + "'");
}

/// Row-wise normalization to class posteriors. Softmax subtracts the row max
/// before exponentiating; RowSum requires non-negative rows with a positive
/// sum; None is the identity.
inline ScoreMatrix normalize_rows(ScoreMatrix sm, Normalization mode) {
    if (mode == Normalization::None) return sm;
    const int c_count = sm.n_classes;
    for (std::size_t t = 0; t < sm.n_rows(); ++t) {
        auto row = sm.row(t);
        if (mode == Normalization::Softmax) {
            const double m = *std::max_element(row.begin(), row.end());
            double sum = 0.0;
            for (int c = 0; c < c_count; ++c) {
                row[static_cast<std::size_t>(c)] = std::exp(row[static_cast<std::size_t>(c)] - m);
                sum += row[static_cast<std::size_t>(c)];
            }
            for (int c = 0; c < c_count; ++c) row[static_cast<std::size_t>(c)] /= sum;
        } else {
            double sum = 0.0;
            for (double v : row) {
                if (v < 0.0)
                    throw ValidationError("normalize_rows: negative score in row " +
                                          std::to_string(t + 1) + " under rowsum mode");
                sum += v;
            }
            if (sum <= 0.0)
                throw ValidationError("normalize_rows: zero row " + std::to_string(t + 1) +
                                      " under rowsum mode");
            for (int c = 0; c < c_count; ++c) row[static_cast<std::size_t>(c)] /= sum;
        }
    }
    return sm;
}

namespace detail {

inline void check_aligned(std::span<const ScoreMatrix* const> members) {
    if (members.empty()) throw ValidationError("fusion needs at least one member");
    for (std::size_t i = 1; i < members.size(); ++i) {
        if (!members[0]->aligned_with(*members[i]))
            throw ValidationError("fusion members '" + members[0]->classifier_id + "' and '" +
                                  members[i]->classifier_id + "' are not aligned");
    }
}

/// Members sorted by classifier_id: the canonical summation order that makes
/// the fused matrix independent of the caller's member order.
inline std::vector<const ScoreMatrix*> sorted_by_id(std::span<const ScoreMatrix> members) {
    std::vector<const ScoreMatrix*> ptrs;
    ptrs.reserve(members.size());
    for (const auto& m : members) ptrs.push_back(&m);
    std::stable_sort(ptrs.begin(), ptrs.end(), [](const ScoreMatrix* a, const ScoreMatrix* b) {
        return a->classifier_id < b->classifier_id;
    });
    return ptrs;
}

} // namespace detail

/// Sum rule: elementwise sum of member scores in classifier_id-sorted order.
/// Members must be aligned on dataset, split, samples and classes.
inline ScoreMatrix sum_rule(std::span<const ScoreMatrix> members, std::string fused_id = {}) {
    auto ptrs = detail::sorted_by_id(members);
    detail::check_aligned(ptrs);

    ScoreMatrix fused = *ptrs.front();
    if (fused_id.empty()) {
        fused_id = "sum(";
        for (std::size_t i = 0; i < ptrs.size(); ++i)
            fused_id += (i ? "+" : "") + ptrs[i]->classifier_id;
        fused_id += ")";
    }
    fused.classifier_id = std::move(fused_id);
    for (std::size_t i = 1; i < ptrs.size(); ++i) {
        const auto& src = ptrs[i]->scores;
        for (std::size_t k = 0; k < fused.scores.size(); ++k) fused.scores[k] += src[k];
    }
    return fused;
}

/// Weighted score average with one weight per member (WS evaluation path).
/// Weights are matched to members by position after id-sorting both.
inline ScoreMatrix weighted_sum(std::span<const ScoreMatrix> members,
                                std::span<const double> weights, std::string fused_id) {
    if (members.size() != weights.size())
        throw ValidationError("weighted_sum: " + std::to_string(members.size()) +
                              " members vs " + std::to_string(weights.size()) + " weights");
    std::vector<std::size_t> order(members.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return members[a].classifier_id < members[b].classifier_id;
    });

    std::vector<const ScoreMatrix*> ptrs;
    ptrs.reserve(members.size());
    for (auto idx : order) ptrs.push_back(&members[idx]);
    detail::check_aligned(ptrs);

    ScoreMatrix fused = *ptrs.front();
    fused.classifier_id = std::move(fused_id);
    std::fill(fused.scores.begin(), fused.scores.end(), 0.0);
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
        const double w = weights[order[i]];
        const auto& src = ptrs[i]->scores;
        for (std::size_t k = 0; k < fused.scores.size(); ++k) fused.scores[k] += w * src[k];
    }
    return fused;
}

/// Per-row argmax; ties break to the lowest class index.
inline std::vector<int> predict(const ScoreMatrix& sm) {
    std::vector<int> preds;
    preds.reserve(sm.n_rows());
    for (std::size_t t = 0; t < sm.n_rows(); ++t) {
        auto row = sm.row(t);
        int best = 0;
        for (int c = 1; c < sm.n_classes; ++c)
            if (row[static_cast<std::size_t>(c)] > row[static_cast<std::size_t>(best)]) best = c;
        preds.push_back(best);
    }
    return preds;
}

/// Conjunctive metadata filter over zoo members; empty sets accept anything.
struct MemberFilter {
    std::set<Architecture> architectures;
    std::set<Tuning> tunings;
    std::set<ResizeStrategy> resizes;
    std::set<std::string> classifier_ids;

    bool matches(const ClassifierRecord& r) const {
        if (!architectures.empty() && !architectures.count(r.architecture)) return false;
        if (!tunings.empty() && !tunings.count(r.tuning)) return false;
        if (!resizes.empty() && !resizes.count(r.resize)) return false;
        if (!classifier_ids.empty() && !classifier_ids.count(r.classifier_id)) return false;
        return true;
    }

    std::string describe() const {
        std::string s;
        auto append = [&s](const std::string& part) {
            if (!s.empty()) s += " & ";
            s += part;
        };
        if (!architectures.empty()) {
            std::string v;
            for (auto a : architectures) v += (v.empty() ? "" : "|") + ensemblier::to_string(a);
            append("architecture in {" + v + "}");
        }
        if (!tunings.empty()) {
            std::string v;
            for (auto t : tunings) v += (v.empty() ? "" : "|") + ensemblier::to_string(t);
            append("tuning in {" + v + "}");
        }
        if (!resizes.empty()) {
            std::string v;
            for (auto r : resizes) v += (v.empty() ? "" : "|") + ensemblier::to_string(r);
            append("resize in {" + v + "}");
        }
        if (!classifier_ids.empty()) {
            std::string v;
            for (const auto& id : classifier_ids) v += (v.empty() ? "" : "|") + id;
            append("id in {" + v + "}");
        }
        return s.empty() ? "any" : s;
    }
};

/// A named fusion rule: either a leaf (filter + normalization applied to the
/// matching zoo members) or the sum of child recipes' fused outputs. Children
/// are summed without re-normalization.
struct EnsembleRecipe {
    std::string name;
    Normalization normalization = Normalization::Softmax;
    MemberFilter filter;                   // leaf only
    std::vector<EnsembleRecipe> children;  // non-empty => nested recipe

    bool is_leaf() const { return children.empty(); }

    static EnsembleRecipe leaf(std::string name, MemberFilter filter,
                               Normalization norm = Normalization::Softmax) {
        EnsembleRecipe r;
        r.name = std::move(name);
        r.filter = std::move(filter);
        r.normalization = norm;
        return r;
    }

    static EnsembleRecipe sum_of(std::string name, std::vector<EnsembleRecipe> children) {
        EnsembleRecipe r;
        r.name = std::move(name);
        r.children = std::move(children);
        return r;
    }
};

/// The named ensembles studied by the toolkit. Fus_* fuse every model that
/// shares a tuning strategy; DN_* chains fuse DenseNet variants; Fus_all
/// fuses the whole zoo.
inline std::vector<EnsembleRecipe> recipe_registry() {
    using R = EnsembleRecipe;
    auto tuned = [](Tuning t) {
        MemberFilter f;
        f.tunings = {t};
        return f;
    };
    auto dn = [](std::set<Tuning> ts, std::set<ResizeStrategy> rs = {}) {
        MemberFilter f;
        f.architectures = {Architecture::DenseNet};
        f.tunings = std::move(ts);
        f.resizes = std::move(rs);
        return f;
    };

    std::vector<R> reg;
    {
        MemberFilter f;
        f.tunings = {Tuning::OneRound};
        f.resizes = {ResizeStrategy::SqR};
        reg.push_back(R::leaf("Fus_SqR", f));
    }
    {
        MemberFilter f;
        f.tunings = {Tuning::OneRound};
        f.resizes = {ResizeStrategy::Pad, ResizeStrategy::Tile};
        reg.push_back(R::leaf("Fus_PT", f));
    }
    reg.push_back(R::leaf("Fus_1R", tuned(Tuning::OneRound)));
    reg.push_back(R::leaf("Fus_2R", tuned(Tuning::TwoRound)));
    reg.push_back(R::leaf("Fus_INC", tuned(Tuning::Incremental)));
    reg.push_back(R::leaf("Fus_SELU", tuned(Tuning::Selu)));
    reg.push_back(R::leaf("DN_1R", dn({Tuning::OneRound})));
    reg.push_back(R::leaf("DN_1R+2R", dn({Tuning::OneRound, Tuning::TwoRound})));
    reg.push_back(
        R::leaf("DN_1R+2R+INC", dn({Tuning::OneRound, Tuning::TwoRound, Tuning::Incremental})));
    reg.push_back(R::leaf("DN_1R+2R+INC+SELU", dn({Tuning::OneRound, Tuning::TwoRound,
                                                   Tuning::Incremental, Tuning::Selu})));
    reg.push_back(R::leaf("Fus_all", MemberFilter{}));
    return reg;
}

inline const EnsembleRecipe* find_recipe(const std::vector<EnsembleRecipe>& registry,
                                         const std::string& name) {
    for (const auto& r : registry)
        if (r.name == name) return &r;
    return nullptr;
}

/// Resolve "A + B" expressions against a registry; a bare name resolves to
/// its registry entry.
inline EnsembleRecipe parse_recipe(const std::string& expr,
                                   const std::vector<EnsembleRecipe>& registry) {
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= expr.size(); ++i) {
        if (i == expr.size() || expr[i] == '+') {
            parts.push_back(trim(expr.substr(start, i - start)));
            start = i + 1;
        }
    }
    std::vector<EnsembleRecipe> children;
    for (const auto& part : parts) {
        if (part.empty()) throw RecipeError("empty term in recipe expression '" + expr + "'");
        const EnsembleRecipe* r = find_recipe(registry, part);
        if (!r) throw RecipeError("unknown recipe '" + part + "'");
        children.push_back(*r);
    }
    if (children.size() == 1) return children.front();
    return EnsembleRecipe::sum_of(trim(expr), std::move(children));
}

/// Recipe from its JSON form: {name, normalization?, filter?, children?}
/// where filter holds optional architectures/tunings/resizes/classifier_ids
/// lists and children is an array of nested recipes.
inline EnsembleRecipe recipe_from_json(const nlohmann::json& j) {
    EnsembleRecipe recipe;
    try {
        recipe.name = j.at("name").get<std::string>();
        if (j.contains("normalization"))
            recipe.normalization = parse_normalization(j.at("normalization").get<std::string>());
        if (j.contains("children")) {
            for (const auto& child : j.at("children"))
                recipe.children.push_back(recipe_from_json(child));
        }
        if (j.contains("filter")) {
            const auto& f = j.at("filter");
            if (f.contains("architectures"))
                for (const auto& a : f.at("architectures"))
                    recipe.filter.architectures.insert(
                        parse_architecture(a.get<std::string>()));
            if (f.contains("tunings"))
                for (const auto& t : f.at("tunings"))
                    recipe.filter.tunings.insert(parse_tuning(t.get<std::string>()));
            if (f.contains("resizes"))
                for (const auto& r : f.at("resizes"))
                    recipe.filter.resizes.insert(parse_resize(r.get<std::string>()));
            if (f.contains("classifier_ids"))
                for (const auto& id : f.at("classifier_ids"))
                    recipe.filter.classifier_ids.insert(id.get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw RecipeError(std::string("bad recipe json: ") + e.what());
    }
    if (!recipe.is_leaf() && !(recipe.filter.architectures.empty() &&
                               recipe.filter.tunings.empty() && recipe.filter.resizes.empty() &&
                               recipe.filter.classifier_ids.empty()))
        throw RecipeError("recipe '" + recipe.name + "': children and filter are exclusive");
    return recipe;
}

inline EnsembleRecipe load_recipe(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open recipe file '" + file.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw RecipeError("recipe file '" + file.string() + "': " + e.what());
    }
    return recipe_from_json(j);
}

/// Load, normalize and fuse the recipe's members for one dataset split.
inline ScoreMatrix build_recipe(const Zoo& zoo, const EnsembleRecipe& recipe,
                                const std::string& dataset_id, const std::string& split_id) {
    if (recipe.is_leaf()) {
        auto entries = zoo.select([&](const ManifestEntry& e) {
            return e.dataset_id == dataset_id && e.split_id == split_id &&
                   recipe.filter.matches(e.record);
        });
        if (entries.empty())
            throw RecipeError("recipe '" + recipe.name + "' resolves to no members on (" +
                              dataset_id + ", " + split_id + "); filter: " +
                              recipe.filter.describe());
        std::vector<ScoreMatrix> members;
        members.reserve(entries.size());
        for (const auto* e : entries)
            members.push_back(normalize_rows(zoo.load(*e), recipe.normalization));
        return sum_rule(members, recipe.name);
    }
    std::vector<ScoreMatrix> fused_children;
    fused_children.reserve(recipe.children.size());
    for (const auto& child : recipe.children)
        fused_children.push_back(build_recipe(zoo, child, dataset_id, split_id));
    return sum_rule(fused_children, recipe.name);
}

} // namespace ensemblier::fusion
