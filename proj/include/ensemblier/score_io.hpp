#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ensemblier/errors.hpp"
#include "ensemblier/types.hpp"

// Score file format: UTF-8 CSV, header `sample_id,label,score_0,...,score_{C-1}`,
// one data row per sample. Floats are written in shortest round-trip form, so
// save followed by load reproduces the matrix bit-exactly. No quoting: sample
// ids must not contain commas or newlines.

namespace ensemblier {

inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
    double v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError(context + ": cannot parse number '" + std::string(s) + "'");
    return v;
}

inline long parse_long(std::string_view s, const std::string& context) {
    long v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError(context + ": cannot parse integer '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return fields;
}

inline void save_scores(const ScoreMatrix& sm, const std::filesystem::path& path) {
    sm.validate();
    for (const auto& id : sm.sample_ids)
        if (id.find(',') != std::string::npos || id.find('\n') != std::string::npos)
            throw ValidationError("sample id '" + id + "' contains a separator character");

    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");

    out << "sample_id,label";
    for (int c = 0; c < sm.n_classes; ++c) out << ",score_" << c;
    out << "\n";
    for (std::size_t t = 0; t < sm.n_rows(); ++t) {
        out << sm.sample_ids[t] << ',' << sm.labels[t];
        for (int c = 0; c < sm.n_classes; ++c) out << ',' << format_double(sm.at(t, c));
        out << "\n";
    }
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

/// Load and validate a score file. Row numbers in error messages are 1-based
/// data rows (the header is row 0).
inline ScoreMatrix load_scores(const std::filesystem::path& path, const ClassMap& classes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open score file '" + path.string() + "'");
    const std::string context = path.filename().string();
    const int n_classes = classes.size();

    std::string line;
    if (!std::getline(in, line)) throw FormatError(context + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3); // exporters love BOMs
    {
        std::string expected = "sample_id,label";
        for (int c = 0; c < n_classes; ++c) expected += ",score_" + std::to_string(c);
        if (line != expected)
            throw FormatError(context + ": bad header '" + line + "', expected '" + expected +
                              "'");
    }

    ScoreMatrix sm;
    sm.n_classes = n_classes;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        const std::string where = context + " row " + std::to_string(row);
        auto fields = split_csv_line(line);
        if (fields.size() != static_cast<std::size_t>(n_classes) + 2)
            throw FormatError(where + ": expected " + std::to_string(n_classes + 2) +
                              " fields, got " + std::to_string(fields.size()));
        sm.sample_ids.emplace_back(fields[0]);
        const long label = parse_long(fields[1], where);
        if (label < 0 || label >= n_classes)
            throw ValidationError(where + ": label " + std::to_string(label) +
                                  " out of range for " + std::to_string(n_classes) + " classes");
        sm.labels.push_back(static_cast<int>(label));
        for (int c = 0; c < n_classes; ++c) {
            const double v = parse_double(fields[static_cast<std::size_t>(c) + 2], where);
            if (!std::isfinite(v))
                throw ValidationError(where + ": non-finite score in column score_" +
                                      std::to_string(c));
            sm.scores.push_back(v);
        }
    }
    return sm;
}

} // namespace ensemblier
