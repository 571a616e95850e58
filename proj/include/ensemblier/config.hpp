#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "ensemblier/errors.hpp"

namespace ensemblier {

/// Flat key=value config with [section] headers; section keys are flattened
/// to "section.key". `#` starts a comment. Command-line flags override these
/// values.
class RunConfig {
public:
    static RunConfig parse(std::istream& in, const std::string& origin = "<config>") {
        RunConfig cfg;
        std::string line, section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t");
                const auto e = s.find_last_not_of(" \t");
                return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[' && line.back() == ']') {
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw FormatError(origin + ":" + std::to_string(line_no) +
                                  ": expected key=value, got '" + line + "'");
            std::string key = trim(line.substr(0, eq));
            if (key.empty())
                throw FormatError(origin + ":" + std::to_string(line_no) + ": empty key");
            if (!section.empty()) key = section + "." + key;
            cfg.values_[key] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    static RunConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open config file '" + path.string() + "'");
        return parse(in, path.string());
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get(const std::string& key, const std::string& fallback = {}) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

} // namespace ensemblier
