#include "cs2net/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace cs2net {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_string(ss.str(), path);
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    cfg.origin_ = origin;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        cfg.sections_[section][key] = {value, lineno};
    }
    return cfg;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second.value;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    if (!has(section, key)) return fallback;
    const auto& e = sections_.at(section).at(key);
    try {
        size_t pos = 0;
        double v = std::stod(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": '" + e.value +
                          "' is not a number for key '" + key + "'");
    }
}

long ConfigFile::get_long(const std::string& section, const std::string& key, long fallback) const {
    if (!has(section, key)) return fallback;
    const auto& e = sections_.at(section).at(key);
    try {
        size_t pos = 0;
        long v = std::stol(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": '" + e.value +
                          "' is not an integer for key '" + key + "'");
    }
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const auto& e = sections_.at(section).at(key);
    std::string v = e.value;
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": '" + e.value +
                      "' is not a boolean for key '" + key + "'");
}

void ConfigFile::validate_keys(const std::map<std::string, std::vector<std::string>>& allowed) const {
    for (const auto& [section, keys] : sections_) {
        auto it = allowed.find(section);
        if (it == allowed.end()) {
            int line = keys.empty() ? 0 : keys.begin()->second.line;
            throw ConfigError(origin_ + ":" + std::to_string(line) + ": unknown section [" +
                              section + "]");
        }
        for (const auto& [key, entry] : keys) {
            if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
                throw ConfigError(origin_ + ":" + std::to_string(entry.line) + ": unknown key '" +
                                  key + "' in section [" + section + "]");
        }
    }
}

}  // namespace cs2net
