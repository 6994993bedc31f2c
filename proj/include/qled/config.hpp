#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qled {

// Parsed key/value config: [section] headers, key = value lines, # comments.
// Repeated keys are kept in order (the temperature table relies on this).
class ConfigFile {
  public:
    bool has_section(const std::string& section) const;
    // Last value wins for repeated keys, matching common expectations.
    std::optional<std::string> get(const std::string& section, const std::string& key) const;
    std::vector<std::string> get_all(const std::string& section, const std::string& key) const;
    std::vector<std::string> section_names() const;
    std::vector<std::string> keys(const std::string& section) const;  // in file order, deduped

    void add(const std::string& section, const std::string& key, const std::string& value);
    void add_section(const std::string& section);

  private:
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections_;
};

// Parses config text; throws ConfigError naming the line of the first syntax
// problem (stray text, missing '=', empty key).
ConfigFile parse_config_text(const std::string& text);

// Loads and parses a config file; throws IoError if it cannot be read.
ConfigFile load_config_file(const std::string& path);

}  // namespace qled
