#include "qled/csv.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qled/errors.hpp"

namespace qled {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp);
        out << text;
        if (!out) {
            std::remove(tmp.c_str());
            throw IoError("write failed: " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw IoError("cannot move " + tmp + " into place: " + ec.message());
    }
}

std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    return line;
}

}  // namespace

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::string text = join(header) + '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw std::invalid_argument("csv row width differs from header");
        text += join(row) + '\n';
    }
    write_text(path, text);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::vector<std::vector<std::string>> cells;
    cells.reserve(rows.size());
    for (const auto& row : rows) {
        std::vector<std::string> r;
        r.reserve(row.size());
        for (double v : row) r.push_back(format_double(v));
        cells.push_back(std::move(r));
    }
    write_csv(path, header, cells);
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read file: " + path);
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            t.header = split_line(line);
            first = false;
        } else {
            t.rows.push_back(split_line(line));
        }
    }
    if (first) throw IoError(path + ": empty file, expected a csv header");
    return t;
}

std::vector<std::vector<double>> read_numeric_csv(
    const std::string& path, const std::vector<std::string>& expected_header) {
    const CsvTable t = read_csv(path);
    if (t.header != expected_header) {
        std::ostringstream ss;
        ss << path << ": header mismatch, expected '" << join(expected_header) << "' got '"
           << join(t.header) << "'";
        throw IoError(ss.str());
    }
    std::vector<std::vector<double>> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        if (row.size() != expected_header.size()) {
            std::ostringstream ss;
            ss << path << ": line " << i + 2 << " has " << row.size() << " cells, expected "
               << expected_header.size();
            throw IoError(ss.str());
        }
        std::vector<double> vals;
        vals.reserve(row.size());
        for (const auto& cell : row) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0') {
                std::ostringstream ss;
                ss << path << ": line " << i + 2 << ": '" << cell << "' is not a number";
                throw IoError(ss.str());
            }
            vals.push_back(v);
        }
        out.push_back(std::move(vals));
    }
    return out;
}

}  // namespace qled
