#include "qled/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "qled/errors.hpp"

namespace qled {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

bool ConfigFile::has_section(const std::string& section) const {
    return sections_.count(section) > 0;
}

std::optional<std::string> ConfigFile::get(const std::string& section,
                                           const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return std::nullopt;
    std::optional<std::string> out;
    for (const auto& [k, v] : it->second)
        if (k == key) out = v;
    return out;
}

std::vector<std::string> ConfigFile::get_all(const std::string& section,
                                             const std::string& key) const {
    std::vector<std::string> out;
    auto it = sections_.find(section);
    if (it == sections_.end()) return out;
    for (const auto& [k, v] : it->second)
        if (k == key) out.push_back(v);
    return out;
}

std::vector<std::string> ConfigFile::section_names() const {
    std::vector<std::string> out;
    for (const auto& [name, entries] : sections_) out.push_back(name);
    return out;
}

std::vector<std::string> ConfigFile::keys(const std::string& section) const {
    std::vector<std::string> out;
    auto it = sections_.find(section);
    if (it == sections_.end()) return out;
    for (const auto& [k, v] : it->second)
        if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    return out;
}

void ConfigFile::add(const std::string& section, const std::string& key,
                     const std::string& value) {
    sections_[section].emplace_back(key, value);
}

void ConfigFile::add_section(const std::string& section) { sections_[section]; }

ConfigFile parse_config_text(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                std::ostringstream ss;
                ss << "line " << line_no << ": unterminated section header";
                throw ConfigError(ss.str());
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                std::ostringstream ss;
                ss << "line " << line_no << ": empty section name";
                throw ConfigError(ss.str());
            }
            cfg.add_section(section);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            std::ostringstream ss;
            ss << "line " << line_no << ": expected key = value";
            throw ConfigError(ss.str());
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            std::ostringstream ss;
            ss << "line " << line_no << ": empty key";
            throw ConfigError(ss.str());
        }
        if (section.empty()) {
            std::ostringstream ss;
            ss << "line " << line_no << ": key outside any [section]";
            throw ConfigError(ss.str());
        }
        cfg.add(section, key, value);
    }
    return cfg;
}

ConfigFile load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace qled
