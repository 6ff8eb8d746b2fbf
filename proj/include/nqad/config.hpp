#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nqad {

/// Flat INI-style configuration: [section] headers, key = value lines,
/// '#'/';' comments. All lookups throw UsageError naming the full
/// "section.key" path when a required key is missing or malformed.
class IniConfig {
public:
    static IniConfig parse_file(const std::string& path);
    static IniConfig parse_string(const std::string& text, const std::string& origin);

    bool has(const std::string& section, const std::string& key) const;
    const std::string& get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    int64_t get_int(const std::string& section, const std::string& key) const;
    int64_t get_int_or(const std::string& section, const std::string& key, int64_t fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;

    /// Canonical text form: sorted sections and keys, one key=value per line.
    std::string echo() const;

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
    std::string origin_;
};

}  // namespace nqad
