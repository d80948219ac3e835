#pragma once

#include <map>
#include <string>

#include "docsr/errors.hpp"

namespace docsr {

// Flat key-value configuration: one `section.key = value` per line,
// '#' comments, blank lines ignored. Later assignments win.
class Config {
public:
    Config() = default;

    static Config parse_text(const std::string& text);
    static Config load(const std::string& path);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_str(const std::string& key, const std::string& fallback) const;
    std::string require_str(const std::string& key) const;
    int get_int(const std::string& key, int fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Deterministic (sorted) serialization; the run_meta echo.
    std::string to_text() const;

    const std::map<std::string, std::string>& values() const { return values_; }
    void merge_from(const Config& overrides);

private:
    std::map<std::string, std::string> values_;
};

}  // namespace docsr
