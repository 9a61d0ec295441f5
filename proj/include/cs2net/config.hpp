#ifndef CS2NET_CONFIG_HPP
#define CS2NET_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

#include "cs2net/error.hpp"

namespace cs2net {

// Line-oriented `key = value` file with `[section]` headers. Unknown keys are
// rejected with their line number; typos must not fall back to defaults.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long get_long(const std::string& section, const std::string& key, long fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    // Throws ConfigError naming the first key (with line number) that is not
    // in the allowed set for its section.
    void validate_keys(const std::map<std::string, std::vector<std::string>>& allowed) const;

private:
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::map<std::string, std::map<std::string, Entry>> sections_;
    std::string origin_;
};

}  // namespace cs2net

#endif
