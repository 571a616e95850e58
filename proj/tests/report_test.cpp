#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "ensemblier/config.hpp"
#include "ensemblier/report.hpp"
#include "ensemblier/rng.hpp"
#include "test_helpers.hpp"

using namespace ensemblier;
using report::ReportTable;

namespace {

ReportTable make_table(std::vector<std::string> rows, std::vector<std::string> cols,
                       std::vector<double> cells) {
    ReportTable t;
    t.row_labels = std::move(rows);
    t.col_labels = std::move(cols);
    t.cells = std::move(cells);
    return t;
}

/// Independent rank oracle: explicit sort per column, tie-averaged ranks,
/// then min-rank over the row averages.
std::vector<double> rank_oracle(const ReportTable& t) {
    const std::size_t rows = t.n_rows(), cols = t.n_cols();
    std::vector<double> avg(rows, 0.0);
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t r = 0; r < rows; ++r) {
            // rank of row r in column c: 1 + count strictly better, averaged
            // over its tie group
            int better = 0, equal = 0;
            for (std::size_t other = 0; other < rows; ++other) {
                if (t.at(other, c) > t.at(r, c)) ++better;
                if (t.at(other, c) == t.at(r, c)) ++equal;
            }
            const double first = better + 1;
            const double last = better + equal;
            avg[r] += (first + last) / 2.0;
        }
    }
    for (auto& v : avg) v /= static_cast<double>(cols);
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        int better = 0;
        for (std::size_t other = 0; other < rows; ++other)
            if (avg[other] < avg[r]) ++better;
        out[r] = better + 1;
    }
    return out;
}

} // namespace

TEST(RankOfAverageRank, DominantMethodRanksFirst) {
    const auto t = make_table({"A", "B"}, {"d1", "d2", "d3"},
                              {0.9, 0.8, 0.95, 0.7, 0.6, 0.9});
    EXPECT_EQ(report::rank_of_average_rank(t), (std::vector<double>{1.0, 2.0}));
}

TEST(RankOfAverageRank, IdenticalRowsShareRankOne) {
    const auto t = make_table({"A", "B", "C"}, {"d1", "d2"}, {0.5, 0.6, 0.5, 0.6, 0.5, 0.6});
    EXPECT_EQ(report::rank_of_average_rank(t), (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(RankOfAverageRank, MatchesSortOracleOnRandomTables) {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t rows = 2 + rng.next_below(6);
        const std::size_t cols = 1 + rng.next_below(5);
        std::vector<double> cells(rows * cols);
        for (auto& v : cells) {
            v = rng.next_below(8) / 8.0; // coarse grid to force ties
        }
        const auto t = make_table(std::vector<std::string>(rows, "m"),
                                  std::vector<std::string>(cols, "d"), cells);
        EXPECT_EQ(report::rank_of_average_rank(t), rank_oracle(t)) << "trial " << trial;
    }
}

TEST(RankOfAverageRank, RejectsBadInput) {
    EXPECT_THROW(report::rank_of_average_rank(make_table({"A"}, {"d"}, {0.5})),
                 ValidationError);
    EXPECT_THROW(report::rank_of_average_rank(
                     make_table({"A", "B"}, {"d"}, {0.5, std::nan("")})),
                 ValidationError);
}

TEST(ReportTable, TextUsesFourDecimalsAndCsvFullPrecision) {
    auto t = make_table({"Fus_1R", "DN_1R"}, {"toyA", "toyB"},
                        {0.95432109, 0.9, 0.25, 1.0 / 3.0});
    report::compute_ranks(t);
    const auto text = report::to_text(t);
    EXPECT_NE(text.find("0.9543"), std::string::npos);
    EXPECT_NE(text.find("0.3333"), std::string::npos);
    EXPECT_EQ(text.find("0.95432109"), std::string::npos);
    EXPECT_NE(text.find("Rank"), std::string::npos);

    const auto csv = report::to_csv(t);
    EXPECT_NE(csv.find("0.95432109"), std::string::npos);
    EXPECT_NE(csv.find("method,toyA,toyB,rank"), std::string::npos);
    // full precision round-trips
    EXPECT_NE(csv.find(format_double(1.0 / 3.0)), std::string::npos);
}

TEST(MetricsRow, MatchesMetricsModule) {
    metrics::ConfusionMatrix cm(2);
    cm.at(0, 0) = 3;
    cm.at(0, 1) = 1;
    cm.at(1, 0) = 2;
    cm.at(1, 1) = 4;
    const auto row = report::metrics_row("d", "half/test", "clf", cm);
    std::stringstream ss(row);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    ASSERT_EQ(fields.size(), 6u);
    EXPECT_EQ(fields[0], "d");
    EXPECT_EQ(fields[2], "clf");
    EXPECT_EQ(std::stod(fields[3]), metrics::f_measure_macro(cm));
    EXPECT_EQ(std::stod(fields[4]), metrics::accuracy_macro(cm));
    EXPECT_EQ(std::stod(fields[5]), metrics::accuracy_overall(cm));
}

TEST(ConfusionCsv, WritesGridWithClassNames) {
    helpers::TempDir tmp("cmcsv");
    metrics::ConfusionMatrix cm(2);
    cm.at(0, 0) = 5;
    cm.at(0, 1) = 1;
    cm.at(1, 1) = 7;
    const auto path = tmp.path() / "cm.csv";
    report::write_confusion_csv(cm, {"crab", "kelp"}, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "true\\predicted,crab,kelp");
    std::getline(in, line);
    EXPECT_EQ(line, "crab,5,1");
    std::getline(in, line);
    EXPECT_EQ(line, "kelp,0,7");
}

TEST(RunConfig, ParsesSectionsAndComments) {
    std::stringstream ss(
        "# global settings\n"
        "zoo = /data/zoo\n"
        "seed=42\n"
        "\n"
        "[selection]\n"
        "k = 11   # paper-sized ensemble\n"
        "objective = accuracy\n"
        "[ws]\n"
        "gamma = 0.5\n");
    const auto cfg = RunConfig::parse(ss);
    EXPECT_EQ(cfg.get("zoo"), "/data/zoo");
    EXPECT_EQ(cfg.get("seed"), "42");
    EXPECT_EQ(cfg.get("selection.k"), "11");
    EXPECT_EQ(cfg.get("selection.objective"), "accuracy");
    EXPECT_EQ(cfg.get("ws.gamma"), "0.5");
    EXPECT_FALSE(cfg.has("gamma"));
    EXPECT_EQ(cfg.get("missing", "fallback"), "fallback");
}

TEST(RunConfig, RejectsMalformedLines) {
    std::stringstream ss("key value without equals\n");
    EXPECT_THROW(RunConfig::parse(ss), FormatError);
}
