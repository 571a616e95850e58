// ensemblier: build, optimize and evaluate classifier ensembles from
// per-sample score matrices.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ensemblier/config.hpp"
#include "ensemblier/errors.hpp"
#include "ensemblier/fusion.hpp"
#include "ensemblier/manifest.hpp"
#include "ensemblier/metrics.hpp"
#include "ensemblier/png_io.hpp"
#include "ensemblier/preprocess.hpp"
#include "ensemblier/report.hpp"
#include "ensemblier/score_io.hpp"
#include "ensemblier/selection.hpp"
#include "ensemblier/toylab.hpp"
#include "ensemblier/ws.hpp"

namespace fs = std::filesystem;
using namespace ensemblier;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

/// Score loader that infers the class count from the header.
ScoreMatrix load_scores_infer(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open score file '" + path.string() + "'");
    std::string header;
    if (!std::getline(in, header)) throw FormatError(path.string() + ": empty file");
    const auto fields = split_csv_line(header);
    if (fields.size() < 4)
        throw FormatError(path.string() + ": header has too few columns for a score file");
    return load_scores(path, ClassMap::of_size(static_cast<int>(fields.size()) - 2));
}

std::vector<std::string> sorted_splits(const Manifest& manifest, const std::string& dataset) {
    std::set<std::string> splits;
    for (const auto& e : manifest.entries)
        if (e.dataset_id == dataset) splits.insert(e.split_id);
    return {splits.begin(), splits.end()};
}

/// Pooled predictions of a recipe over every split of a dataset.
std::pair<std::vector<int>, std::vector<int>> recipe_predictions(
    const Zoo& zoo, const fusion::EnsembleRecipe& recipe, const std::string& dataset) {
    std::vector<int> preds, labels;
    for (const auto& split : sorted_splits(zoo.manifest(), dataset)) {
        const auto fused = fusion::build_recipe(zoo, recipe, dataset, split);
        const auto p = fusion::predict(fused);
        preds.insert(preds.end(), p.begin(), p.end());
        labels.insert(labels.end(), fused.labels.begin(), fused.labels.end());
    }
    return {preds, labels};
}

nlohmann::ordered_json loo_json(const selection::LooResult& result) {
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    for (const auto& p : result.per_dataset) {
        nlohmann::ordered_json item;
        item["held_out"] = p.held_out;
        item["subset"] = p.subset;
        item["weights"] = p.weights;
        item["accuracy"] = p.accuracy;
        per.push_back(std::move(item));
    }
    nlohmann::ordered_json j;
    j["per_dataset"] = std::move(per);
    j["avg_accuracy"] = result.avg_accuracy;
    return j;
}

void write_json(const nlohmann::ordered_json& j, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << j.dump(2) << "\n";
        return;
    }
    const fs::path path(out);
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error("cannot write '" + out + "'");
    file << j.dump(2) << "\n";
}

/// Flag-beats-config lookup.
struct ConfigLayer {
    RunConfig file;

    std::string resolve(const CLI::Option* opt, const std::string& key,
                        const std::string& flag_value) const {
        if (opt != nullptr && opt->count() > 0) return flag_value;
        if (file.has(key)) return file.get(key);
        return flag_value;
    }
};

std::vector<std::string> parse_datasets_flag(const std::string& csv, const Manifest& manifest) {
    if (csv.empty()) return manifest.dataset_ids();
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= csv.size(); ++i) {
        if (i == csv.size() || csv[i] == ',') {
            if (i > start) out.emplace_back(csv.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ensemble construction, selection and evaluation over score matrices"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "key=value config file; flags override");
    int threads = 0;
    app.add_option("--threads", threads, "cap worker threads (ENSEMBLIER_THREADS)");

    // validate
    auto* cmd_validate = app.add_subcommand("validate", "check a zoo manifest and its files");
    std::string validate_zoo_path;
    cmd_validate->add_option("--zoo", validate_zoo_path, "manifest path")->required();

    // preprocess
    auto* cmd_pre = app.add_subcommand("preprocess", "resize png images (sqr|pad|tile)");
    std::string pre_strategy = "sqr", pre_in, pre_out;
    int pre_target = 224, pre_base = 256;
    cmd_pre->add_option("--strategy", pre_strategy, "sqr|pad|tile")->required();
    cmd_pre->add_option("--target", pre_target, "output side length")->required();
    cmd_pre->add_option("--base", pre_base, "tile base size (default 256)");
    cmd_pre->add_option("--in", pre_in, "input directory of png files")->required();
    cmd_pre->add_option("--out", pre_out, "output directory")->required();

    // toylab
    auto* cmd_toylab = app.add_subcommand("toylab", "synthetic tasks and model zoos");
    auto* cmd_gen = cmd_toylab->add_subcommand("generate", "write the synthetic task csvs");
    auto* cmd_train = cmd_toylab->add_subcommand("train", "train the grid and export a zoo");
    std::uint64_t toylab_seed = toylab::ToySuiteConfig{}.seed;
    std::string toylab_out = "zoo";
    std::string toylab_grid = "default";
    int toylab_datasets = 5;
    for (auto* c : {cmd_gen, cmd_train}) {
        c->add_option("--seed", toylab_seed, "suite seed");
        c->add_option("--out", toylab_out, "output directory");
        c->add_option("--datasets", toylab_datasets, "number of tasks (1..5)");
    }
    cmd_train->add_option("--grid", toylab_grid, "default|tuned|minimal");

    // metrics
    auto* cmd_metrics = app.add_subcommand("metrics", "score a single score file");
    std::string metrics_scores, metrics_dataset = "-", metrics_split = "-",
                metrics_method = "-", metrics_cm_out, metrics_out;
    cmd_metrics->add_option("--scores", metrics_scores, "score csv")->required();
    cmd_metrics->add_option("--dataset", metrics_dataset, "dataset label for the report row");
    cmd_metrics->add_option("--split", metrics_split, "split label for the report row");
    cmd_metrics->add_option("--method", metrics_method, "method label for the report row");
    cmd_metrics->add_option("--cm-out", metrics_cm_out, "write the confusion matrix csv here");
    cmd_metrics->add_option("--out", metrics_out, "write the metrics csv here");

    // fuse
    auto* cmd_fuse = app.add_subcommand("fuse", "build a named ensemble's fused score file");
    std::string fuse_zoo, fuse_recipe, fuse_dataset, fuse_split, fuse_out,
        fuse_norm = "softmax";
    auto* fuse_recipe_opt = cmd_fuse->add_option(
        "--recipe", fuse_recipe, "recipe name, 'A + B' expression, or recipe json file");
    auto* fuse_dataset_opt = cmd_fuse->add_option("--dataset", fuse_dataset, "dataset id");
    cmd_fuse->add_option("--zoo", fuse_zoo, "manifest path");
    cmd_fuse->add_option("--split", fuse_split, "split id (default: every split)");
    cmd_fuse->add_option("--out", fuse_out, "output score file")->required();
    cmd_fuse->add_option("--norm", fuse_norm, "softmax|rowsum|none (default softmax)");

    // sffs
    auto* cmd_sffs = app.add_subcommand("sffs", "floating-selection of an ensemble subset");
    std::string sffs_zoo, sffs_out, sffs_objective = "accuracy", sffs_datasets_csv,
                sffs_pred_dir;
    int sffs_k = 11;
    bool sffs_loo = false;
    cmd_sffs->add_option("--zoo", sffs_zoo, "manifest path");
    cmd_sffs->add_option("--k", sffs_k, "target subset size (default 11)");
    cmd_sffs->add_option("--objective", sffs_objective, "accuracy|fmacro");
    cmd_sffs->add_flag("--loo", sffs_loo, "leave-one-out-dataset protocol");
    cmd_sffs->add_option("--datasets", sffs_datasets_csv, "comma list (default: all in zoo)");
    cmd_sffs->add_option("--pred-dir", sffs_pred_dir,
                         "write held-out prediction csvs here (loo only)");
    cmd_sffs->add_option("--out", sffs_out, "output json ('-' = stdout)");

    // ws
    auto* cmd_ws = app.add_subcommand("ws", "weighted selection on the simplex");
    std::string ws_zoo, ws_out, ws_datasets_csv, ws_pred_dir;
    ws::WsConfig ws_cfg;
    std::size_t ws_top_k = 0;
    bool ws_loo = false;
    cmd_ws->add_option("--zoo", ws_zoo, "manifest path");
    cmd_ws->add_option("--gamma", ws_cfg.gamma, "sparsity exponent in (0,1), default 0.5");
    cmd_ws->add_option("--reg", ws_cfg.reg_coefficient,
                       "regularization weight, default 0.1 (1.0 = bare sum of w^gamma)");
    cmd_ws->add_option("--lr", ws_cfg.learning_rate, "sgd learning rate, default 0.05");
    cmd_ws->add_option("--epochs", ws_cfg.epochs, "sgd epochs, default 200");
    cmd_ws->add_option("--batch", ws_cfg.batch_size, "minibatch size, default 64");
    cmd_ws->add_option("--seed", ws_cfg.seed, "optimizer seed");
    cmd_ws->add_option("--threshold", ws_cfg.zero_threshold,
                       "zero weights below this (default 1/(4n))");
    cmd_ws->add_option("--top-k", ws_top_k, "keep exactly k members instead of thresholding");
    cmd_ws->add_flag("--loo", ws_loo, "leave-one-out-dataset protocol");
    cmd_ws->add_option("--datasets", ws_datasets_csv, "comma list (default: all in zoo)");
    cmd_ws->add_option("--pred-dir", ws_pred_dir,
                       "write held-out prediction csvs here (loo only)");
    cmd_ws->add_option("--out", ws_out, "output json ('-' = stdout)");

    // report
    auto* cmd_report = app.add_subcommand("report", "metric table over recipes and datasets");
    std::string report_zoo, report_recipes = "all", report_out_dir;
    bool report_singles = false;
    std::string report_metric = "fmacro";
    cmd_report->add_option("--zoo", report_zoo, "manifest path");
    cmd_report->add_option("--recipes", report_recipes,
                           "'all' or comma list of recipe names/expressions");
    cmd_report->add_flag("--singles", report_singles, "add one row per single classifier");
    cmd_report->add_option("--metric", report_metric, "fmacro|accuracy (table cells)");
    cmd_report->add_option("--out", report_out_dir, "write report.csv/report.json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help() << "\n";
        return kExitUsage;
    }

    try {
        ConfigLayer config;
        if (!config_path.empty()) config.file = RunConfig::load(config_path);
        if (threads > 0) {
            setenv("ENSEMBLIER_THREADS", std::to_string(threads).c_str(), 1);
        } else if (config.file.has("threads")) {
            setenv("ENSEMBLIER_THREADS", config.file.get("threads").c_str(), 1);
        }
        auto zoo_path_for = [&](const CLI::Option* opt, const std::string& value) {
            const std::string resolved = config.resolve(opt, "zoo", value);
            if (resolved.empty())
                throw ValidationError("no zoo manifest given (flag --zoo or config key 'zoo')");
            return resolved;
        };

        if (*cmd_validate) {
            const auto manifest = Manifest::load(validate_zoo_path);
            const auto report = validate_zoo(manifest);
            for (const auto& entry : report.entries) {
                const auto& e = manifest.entries[entry.entry_index];
                std::cout << (entry.ok ? "OK    " : "ERROR ") << e.record.classifier_id << " ("
                          << e.dataset_id << ", " << e.split_id << ")"
                          << (entry.ok ? "" : ": " + entry.message) << "\n";
            }
            for (const auto& msg : report.cross_errors) std::cout << "CROSS " << msg << "\n";
            std::cout << (report.all_ok() ? "zoo is consistent" : "zoo has problems") << "\n";
            return report.all_ok() ? kExitOk : kExitData;
        }

        if (*cmd_pre) {
            const auto strategy = preprocess::parse_strategy(pre_strategy);
            fs::create_directories(pre_out);
            std::vector<fs::path> inputs;
            for (const auto& entry : fs::directory_iterator(pre_in))
                if (entry.is_regular_file() && entry.path().extension() == ".png")
                    inputs.push_back(entry.path());
            std::sort(inputs.begin(), inputs.end());
            if (inputs.empty()) throw ValidationError("no .png files in '" + pre_in + "'");
            parallel_for(inputs.size(), [&](std::size_t i) {
                const auto img = png_io::read(inputs[i]);
                const auto out = preprocess::apply_strategy(img, strategy, pre_target, pre_base);
                png_io::write(out, fs::path(pre_out) / inputs[i].filename());
            });
            std::cout << "preprocessed " << inputs.size() << " images -> " << pre_out << "\n";
            return kExitOk;
        }

        if (*cmd_toylab) {
            toylab::ToySuiteConfig cfg;
            cfg.seed = toylab_seed;
            cfg.n_datasets = toylab_datasets;
            if (*cmd_gen) {
                for (const auto& spec : toylab::default_task_specs(cfg))
                    toylab::write_task_csv(toylab::gen_task(spec),
                                           fs::path(toylab_out) / (spec.dataset_id + ".csv"));
                std::cout << "wrote " << cfg.n_datasets << " task files -> " << toylab_out
                          << "\n";
                return kExitOk;
            }
            if (toylab_grid == "minimal")
                cfg.grid = toylab::GridSpec::minimal();
            else if (toylab_grid == "tuned")
                cfg.grid.incremental = false;
            else if (toylab_grid != "default")
                throw ValidationError("unknown grid '" + toylab_grid + "'");
            const auto manifest = toylab::build_toy_zoo(toylab_out, cfg);
            std::cout << "trained " << manifest.entries.size() << " zoo entries -> "
                      << toylab_out << "/manifest.json\n";
            return kExitOk;
        }

        if (*cmd_metrics) {
            auto sm = load_scores_infer(metrics_scores);
            sm.dataset_id = metrics_dataset;
            sm.split_id = metrics_split;
            sm.classifier_id = metrics_method;
            const auto cm =
                metrics::confusion(fusion::predict(sm), sm.labels, sm.n_classes);
            const std::string row =
                report::metrics_row(metrics_dataset, metrics_split, metrics_method, cm);
            std::cout << report::kMetricsHeader << "\n" << row << "\n";
            if (!metrics_out.empty()) {
                std::ofstream out(metrics_out, std::ios::binary);
                out << report::kMetricsHeader << "\n" << row << "\n";
            }
            if (!metrics_cm_out.empty())
                report::write_confusion_csv(cm, ClassMap::of_size(cm.n_classes).names(),
                                            metrics_cm_out);
            return kExitOk;
        }

        if (*cmd_fuse) {
            Zoo zoo(Manifest::load(zoo_path_for(cmd_fuse->get_option("--zoo"), fuse_zoo)));
            const std::string recipe_expr =
                config.resolve(fuse_recipe_opt, "fuse.recipe", fuse_recipe);
            if (recipe_expr.empty()) throw ValidationError("no recipe given");
            const std::string dataset =
                config.resolve(fuse_dataset_opt, "fuse.dataset", fuse_dataset);
            if (dataset.empty()) throw ValidationError("no dataset given");

            auto registry = fusion::recipe_registry();
            auto recipe = fs::is_regular_file(recipe_expr)
                              ? fusion::load_recipe(recipe_expr)
                              : fusion::parse_recipe(recipe_expr, registry);
            if (recipe.is_leaf() && cmd_fuse->count("--norm") > 0)
                recipe.normalization = fusion::parse_normalization(fuse_norm);

            std::vector<std::string> splits =
                fuse_split.empty() ? sorted_splits(zoo.manifest(), dataset)
                                   : std::vector<std::string>{fuse_split};
            if (splits.empty())
                throw ValidationError("dataset '" + dataset + "' has no splits in the zoo");
            for (const auto& split : splits) {
                auto fused = fusion::build_recipe(zoo, recipe, dataset, split);
                fs::path out = fuse_out;
                if (splits.size() > 1) {
                    std::string tag = split;
                    std::replace(tag.begin(), tag.end(), '/', '_');
                    out = out.parent_path() / (out.stem().string() + "." + tag +
                                               out.extension().string());
                }
                save_scores(fused, out);
                std::cout << "wrote " << out.string() << " (" << fused.n_rows() << " rows)\n";
            }
            return kExitOk;
        }

        if (*cmd_sffs) {
            Zoo zoo(Manifest::load(zoo_path_for(cmd_sffs->get_option("--zoo"), sffs_zoo)));
            selection::SelectionConfig cfg;
            cfg.k_target = sffs_k;
            cfg.objective = selection::parse_objective(sffs_objective);
            const auto datasets = parse_datasets_flag(sffs_datasets_csv, zoo.manifest());

            nlohmann::ordered_json j;
            j["objective"] = sffs_objective;
            j["k"] = sffs_k;
            if (sffs_loo) {
                const auto result =
                    selection::loo_protocol(zoo, datasets, selection::sffs_selector(cfg));
                j.update(loo_json(result));
                if (!sffs_pred_dir.empty())
                    selection::write_loo_predictions(result, sffs_pred_dir);
            }
            // the all-datasets selection (no holdout)
            const auto set = selection::assemble_candidates(zoo, datasets,
                                                            fusion::Normalization::Softmax);
            const auto final_run = selection::sffs(set, cfg);
            j["final_selection"] = final_run.selected;
            j["final_objective"] = final_run.objective;
            nlohmann::ordered_json by_size;
            for (const auto& [size, rec] : final_run.best_by_size) {
                nlohmann::ordered_json item;
                item["ids"] = rec.ids;
                item["objective"] = rec.objective;
                by_size[std::to_string(size)] = std::move(item);
            }
            j["best_by_size"] = std::move(by_size);
            write_json(j, sffs_out);
            return kExitOk;
        }

        if (*cmd_ws) {
            Zoo zoo(Manifest::load(zoo_path_for(cmd_ws->get_option("--zoo"), ws_zoo)));
            const auto datasets = parse_datasets_flag(ws_datasets_csv, zoo.manifest());

            nlohmann::ordered_json j;
            j["gamma"] = ws_cfg.gamma;
            j["reg"] = ws_cfg.reg_coefficient;
            if (ws_loo) {
                const auto result =
                    selection::loo_protocol(zoo, datasets, ws::selector(ws_cfg, ws_top_k));
                j.update(loo_json(result));
                if (!ws_pred_dir.empty()) selection::write_loo_predictions(result, ws_pred_dir);
            }
            const auto set = selection::assemble_candidates(zoo, datasets,
                                                            fusion::Normalization::Softmax);
            const auto opt = ws::optimize(set, ws_cfg);
            const auto sel = ws_top_k > 0 ? ws::select_top_k(opt.weights, ws_top_k)
                                          : ws::select(opt.weights, ws_cfg.zero_threshold);
            nlohmann::ordered_json weights = nlohmann::ordered_json::array();
            for (std::size_t i = 0; i < set.ids.size(); ++i) {
                nlohmann::ordered_json item;
                item["classifier_id"] = set.ids[i];
                item["w"] = opt.weights.w[i];
                weights.push_back(std::move(item));
            }
            j["weights"] = std::move(weights);
            nlohmann::ordered_json selected = nlohmann::ordered_json::array();
            for (auto idx : sel.kept) {
                nlohmann::ordered_json item;
                item["classifier_id"] = set.ids[idx];
                item["w"] = sel.weights.w[idx];
                selected.push_back(std::move(item));
            }
            j["selected"] = std::move(selected);
            j["final_loss"] = opt.epoch_loss.back();
            if (!ws_loo) {
                // accuracy of the selected weighted ensemble per dataset
                nlohmann::ordered_json per = nlohmann::ordered_json::array();
                for (std::size_t bi = 0; bi < set.blocks.size(); ++bi) {
                    const auto& block = set.blocks[bi];
                    const auto c_count = static_cast<std::size_t>(block.n_classes);
                    std::int64_t correct = 0;
                    for (std::size_t t = 0; t < block.labels.size(); ++t) {
                        int best = 0;
                        double best_score = -1.0;
                        for (std::size_t c = 0; c < c_count; ++c) {
                            double v = 0.0;
                            for (auto idx : sel.kept)
                                v += sel.weights.w[idx] * block.scores[idx][t * c_count + c];
                            if (v > best_score) {
                                best_score = v;
                                best = static_cast<int>(c);
                            }
                        }
                        if (best == block.labels[t]) ++correct;
                    }
                    nlohmann::ordered_json item;
                    item["dataset"] = block.dataset_id;
                    item["accuracy"] = static_cast<double>(correct) /
                                       static_cast<double>(block.labels.size());
                    per.push_back(std::move(item));
                }
                j["per_dataset"] = std::move(per);
            }
            write_json(j, ws_out);
            return kExitOk;
        }

        if (*cmd_report) {
            Zoo zoo(Manifest::load(zoo_path_for(cmd_report->get_option("--zoo"), report_zoo)));
            const auto datasets = zoo.manifest().dataset_ids();
            const bool use_fmacro = report_metric == "fmacro";
            if (!use_fmacro && report_metric != "accuracy")
                throw ValidationError("unknown metric '" + report_metric + "'");

            auto registry = fusion::recipe_registry();
            std::vector<fusion::EnsembleRecipe> rows;
            if (report_recipes == "all") {
                for (const auto& recipe : registry) {
                    // keep only recipes that resolve on every dataset
                    bool ok = true;
                    for (const auto& d : datasets) {
                        for (const auto& split : sorted_splits(zoo.manifest(), d)) {
                            const auto members = zoo.select([&](const ManifestEntry& e) {
                                return e.dataset_id == d && e.split_id == split &&
                                       recipe.filter.matches(e.record);
                            });
                            if (members.empty()) ok = false;
                        }
                    }
                    if (ok) rows.push_back(recipe);
                }
                if (rows.empty())
                    throw ValidationError("no registry recipe resolves on this zoo");
            } else {
                std::size_t start = 0;
                for (std::size_t i = 0; i <= report_recipes.size(); ++i) {
                    if (i == report_recipes.size() || report_recipes[i] == ',') {
                        if (i > start)
                            rows.push_back(fusion::parse_recipe(
                                report_recipes.substr(start, i - start), registry));
                        start = i + 1;
                    }
                }
            }

            report::ReportTable table;
            table.col_labels = datasets;
            for (const auto& recipe : rows) {
                table.row_labels.push_back(recipe.name);
                for (const auto& d : datasets) {
                    const auto [preds, labels] = recipe_predictions(zoo, recipe, d);
                    const auto cm = metrics::confusion(
                        preds, labels, zoo.manifest().classes_for(d).size());
                    table.cells.push_back(use_fmacro ? metrics::f_measure_macro(cm)
                                                     : metrics::accuracy_overall(cm));
                }
            }
            if (report_singles) {
                std::set<std::string> ids;
                for (const auto& e : zoo.manifest().entries)
                    ids.insert(e.record.classifier_id);
                for (const auto& id : ids) {
                    fusion::MemberFilter filter;
                    filter.classifier_ids = {id};
                    const auto single = fusion::EnsembleRecipe::leaf(id, filter);
                    table.row_labels.push_back(id);
                    for (const auto& d : datasets) {
                        const auto [preds, labels] = recipe_predictions(zoo, single, d);
                        const auto cm = metrics::confusion(
                            preds, labels, zoo.manifest().classes_for(d).size());
                        table.cells.push_back(use_fmacro ? metrics::f_measure_macro(cm)
                                                         : metrics::accuracy_overall(cm));
                    }
                }
            }
            if (table.n_rows() >= 2) report::compute_ranks(table);
            std::cout << "metric: " << (use_fmacro ? "F_macro" : "accuracy_overall") << "\n";
            std::cout << report::to_text(table);
            if (!report_out_dir.empty()) {
                fs::create_directories(report_out_dir);
                std::ofstream csv(fs::path(report_out_dir) / "report.csv", std::ios::binary);
                csv << report::to_csv(table);
                nlohmann::ordered_json j;
                j["metric"] = report_metric;
                j["datasets"] = table.col_labels;
                j["methods"] = table.row_labels;
                j["cells"] = table.cells;
                j["ranks"] = table.ranks;
                write_json(j, (fs::path(report_out_dir) / "report.json").string());
            }
            return kExitOk;
        }
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
