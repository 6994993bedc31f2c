#pragma once

#include <string>
#include <vector>

namespace qled {

// Shortest round-trippable rendering ("%.10g"); NaN prints as "nan".
std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Atomic write (temp file + rename). Every row must match the header width.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

CsvTable read_csv(const std::string& path);

// Reads a CSV whose header must equal expected_header; cells parse as
// doubles ("nan" allowed). Throws IoError naming the line on any mismatch.
std::vector<std::vector<double>> read_numeric_csv(const std::string& path,
                                                  const std::vector<std::string>& expected_header);

}  // namespace qled
