#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "ensemblier/errors.hpp"
#include "ensemblier/metrics.hpp"
#include "ensemblier/score_io.hpp"

namespace ensemblier::report {

/// Methods x datasets metric table with the meta-rank column.
struct ReportTable {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<double> cells; // rows x cols, row-major
    std::vector<double> ranks; // filled by compute_ranks

    std::size_t n_rows() const { return row_labels.size(); }
    std::size_t n_cols() const { return col_labels.size(); }
    double at(std::size_t r, std::size_t c) const { return cells[r * n_cols() + c]; }
};

/// Rank of the average rank: rank methods per column (higher metric is
/// better, rank 1 is best, ties get the average rank), average each row's
/// ranks, then rank those averages ascending with ties sharing the minimum
/// rank.
inline std::vector<double> rank_of_average_rank(const ReportTable& table) {
    const std::size_t rows = table.n_rows();
    const std::size_t cols = table.n_cols();
    if (rows < 2) throw ValidationError("rank table needs at least 2 rows");
    if (cols < 1) throw ValidationError("rank table needs at least 1 column");
    for (double v : table.cells)
        if (std::isnan(v)) throw ValidationError("rank table contains a NaN cell");

    std::vector<double> rank_sum(rows, 0.0);
    std::vector<std::size_t> order(rows);
    for (std::size_t c = 0; c < cols; ++c) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return table.at(a, c) > table.at(b, c);
        });
        std::size_t i = 0;
        while (i < rows) {
            std::size_t j = i;
            while (j + 1 < rows && table.at(order[j + 1], c) == table.at(order[i], c)) ++j;
            const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) rank_sum[order[k]] += shared;
            i = j + 1;
        }
    }
    std::vector<double> avg(rows);
    for (std::size_t r = 0; r < rows; ++r) avg[r] = rank_sum[r] / static_cast<double>(cols);

    std::vector<double> final_rank(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double rank = 1.0;
        for (std::size_t other = 0; other < rows; ++other)
            if (avg[other] < avg[r]) rank += 1.0;
        final_rank[r] = rank; // ties share the minimum rank
    }
    return final_rank;
}

inline void compute_ranks(ReportTable& table) { table.ranks = rank_of_average_rank(table); }

inline std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

/// Human table: 4-decimal cells, optional Rank column.
inline std::string to_text(const ReportTable& table) {
    std::size_t label_width = 6;
    for (const auto& l : table.row_labels) label_width = std::max(label_width, l.size());

    std::string out;
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    out += pad("method", label_width + 2);
    for (const auto& c : table.col_labels) out += pad(c, std::max<std::size_t>(8, c.size() + 2));
    if (!table.ranks.empty()) out += "Rank";
    out += "\n";
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        out += pad(table.row_labels[r], label_width + 2);
        for (std::size_t c = 0; c < table.n_cols(); ++c)
            out += pad(fixed4(table.at(r, c)),
                       std::max<std::size_t>(8, table.col_labels[c].size() + 2));
        if (!table.ranks.empty()) {
            const double rank = table.ranks[r];
            if (rank == std::floor(rank))
                out += std::to_string(static_cast<long>(rank));
            else
                out += fixed4(rank);
        }
        out += "\n";
    }
    return out;
}

/// Machine form: full-precision cells.
inline std::string to_csv(const ReportTable& table) {
    std::string out = "method";
    for (const auto& c : table.col_labels) out += "," + c;
    if (!table.ranks.empty()) out += ",rank";
    out += "\n";
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        out += table.row_labels[r];
        for (std::size_t c = 0; c < table.n_cols(); ++c)
            out += "," + format_double(table.at(r, c));
        if (!table.ranks.empty()) out += "," + format_double(table.ranks[r]);
        out += "\n";
    }
    return out;
}

/// One `dataset,split,method,F_macro,Acc_macro,Acc_overall` row.
inline std::string metrics_row(const std::string& dataset, const std::string& split,
                               const std::string& method,
                               const metrics::ConfusionMatrix& cm) {
    return dataset + "," + split + "," + method + "," +
           format_double(metrics::f_measure_macro(cm)) + "," +
           format_double(metrics::accuracy_macro(cm)) + "," +
           format_double(metrics::accuracy_overall(cm));
}

inline constexpr const char* kMetricsHeader = "dataset,split,method,F_macro,Acc_macro,Acc_overall";

/// Confusion matrix as a CSV grid: header `true\\predicted` + class names.
inline void write_confusion_csv(const metrics::ConfusionMatrix& cm,
                                const std::vector<std::string>& class_names,
                                const std::filesystem::path& path) {
    if (static_cast<int>(class_names.size()) != cm.n_classes)
        throw ValidationError("confusion csv: class name count mismatch");
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write confusion csv '" + path.string() + "'");
    out << "true\\predicted";
    for (const auto& n : class_names) out << ',' << n;
    out << "\n";
    for (int i = 0; i < cm.n_classes; ++i) {
        out << class_names[static_cast<std::size_t>(i)];
        for (int j = 0; j < cm.n_classes; ++j) out << ',' << cm.at(i, j);
        out << "\n";
    }
}

} // namespace ensemblier::report
