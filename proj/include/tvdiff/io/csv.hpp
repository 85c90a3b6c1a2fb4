#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "tvdiff/error.hpp"

namespace tvdiff::io {

/// One parsed row with its 1-based line number in the source file.
struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> cells;
};

struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<CsvRow> rows;

    /// Column index of `name`; -1 if absent.
    int column(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return static_cast<int>(c);
        return -1;
    }
    int require_column(const std::string& name) const {
        const int c = column(name);
        if (c < 0) throw DataError(source + ": missing column '" + name + "'");
        return c;
    }
    std::string where(const CsvRow& row) const { return source + " line " + std::to_string(row.line); }
};

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Comma-separated fields; no quoting.
inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    CsvTable t;
    t.source = path;
    std::string line;
    std::size_t number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++number;
        if (number == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (trim(line).empty() || trim(line)[0] == '#') continue;
        if (line.find('"') != std::string::npos)
            throw DataError(path + " line " + std::to_string(number) + ": quoted fields are not supported");
        auto cells = split_line(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
            throw DataError(path + " line " + std::to_string(number) + ": expected " + std::to_string(t.header.size()) +
                            " fields, found " + std::to_string(cells.size()));
        t.rows.push_back({number, std::move(cells)});
    }
    if (!have_header) throw DataError(path + ": empty file");
    return t;
}

inline double parse_double(const std::string& s, const std::string& where, const std::string& field) {
    if (s.empty()) throw DataError(where + ": missing value for '" + field + "'");
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw DataError(where + ": '" + s + "' is not a finite number for '" + field + "'");
    return v;
}

inline long long parse_integer(const std::string& s, const std::string& where, const std::string& field) {
    if (s.empty()) throw DataError(where + ": missing value for '" + field + "'");
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError(where + ": '" + s + "' is not an integer for '" + field + "'");
    return v;
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

/// Writes rows of cells joined by commas.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot write " + path);
    }
    CsvWriter& row(const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c > 0) out_ << ',';
            out_ << cells[c];
        }
        out_ << '\n';
        if (!out_) throw DataError("write failed on " + path_);
        return *this;
    }

private:
    std::string path_;
    std::ofstream out_;
};

}  // namespace tvdiff::io
