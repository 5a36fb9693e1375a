#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "forge/corpus_io.hpp"
#include "forge/error.hpp"

namespace forge {

struct DelimitedRow {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

// Tab- or comma-delimited text; the delimiter is picked per line (tab wins).
// Blank lines and lines starting with '#' are skipped. No quoting.
inline std::vector<DelimitedRow> read_delimited(const std::filesystem::path &path) {
    LineReader reader(path);
    std::vector<DelimitedRow> rows;
    std::string line;
    while (reader.next(line)) {
        if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#')
            continue;
        char delim = line.find('\t') != std::string::npos ? '\t' : ',';
        DelimitedRow row;
        row.line = reader.line_no();
        std::size_t start = 0;
        while (true) {
            auto pos = line.find(delim, start);
            auto field = line.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
            while (!field.empty() && field.front() == ' ')
                field.erase(field.begin());
            while (!field.empty() && field.back() == ' ')
                field.pop_back();
            row.fields.push_back(std::move(field));
            if (pos == std::string::npos)
                break;
            start = pos + 1;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline double parse_real(const std::string &s, const std::string &file, std::size_t line) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception &) {
        throw FormatError(file, line, "not a number: '" + s + "'");
    }
    if (pos != s.size())
        throw FormatError(file, line, "not a number: '" + s + "'");
    return v;
}

} // namespace forge
