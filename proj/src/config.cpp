#include "nqad/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "nqad/error.hpp"

namespace nqad {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

IniConfig IniConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

IniConfig IniConfig::parse_string(const std::string& text, const std::string& origin) {
    IniConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line, section;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw UsageError(origin + ":" + std::to_string(line_no) + ": unterminated section");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw UsageError(origin + ":" + std::to_string(line_no) + ": empty section name");
            cfg.sections_[section];
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw UsageError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw UsageError(origin + ":" + std::to_string(line_no) + ": empty key");
        if (section.empty())
            throw UsageError(origin + ":" + std::to_string(line_no) + ": key '" + key +
                             "' outside any [section]");
        if (cfg.sections_[section].count(key))
            throw UsageError(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                             section + "." + key + "'");
        cfg.sections_[section][key] = value;
    }
    return cfg;
}

bool IniConfig::has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
}

const std::string& IniConfig::get(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end() || !it->second.count(key))
        throw UsageError(origin_ + ": missing required key '" + section + "." + key + "'");
    return it->second.at(key);
}

std::string IniConfig::get_or(const std::string& section, const std::string& key,
                              const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

int64_t IniConfig::get_int(const std::string& section, const std::string& key) const {
    const std::string& s = get(section, key);
    int64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw UsageError(origin_ + ": key '" + section + "." + key + "' is not an integer: '" + s +
                         "'");
    return v;
}

int64_t IniConfig::get_int_or(const std::string& section, const std::string& key,
                              int64_t fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

double IniConfig::get_double(const std::string& section, const std::string& key) const {
    const std::string& s = get(section, key);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw UsageError(origin_ + ": key '" + section + "." + key + "' is not a number: '" + s +
                         "'");
    return v;
}

double IniConfig::get_double_or(const std::string& section, const std::string& key,
                                double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

bool IniConfig::get_bool_or(const std::string& section, const std::string& key,
                            bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& s = get(section, key);
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw UsageError(origin_ + ": key '" + section + "." + key + "' is not a boolean: '" + s + "'");
}

std::string IniConfig::echo() const {
    std::string out;
    for (const auto& [section, keys] : sections_) {
        out += "[" + section + "]\n";
        for (const auto& [key, value] : keys) out += key + " = " + value + "\n";
    }
    return out;
}

}  // namespace nqad
