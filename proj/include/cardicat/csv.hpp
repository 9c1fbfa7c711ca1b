// RFC-4180 style CSV reading and writing (UTF-8, header row, LF output).
#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cardicat/errors.hpp"

namespace cardicat {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

namespace csv_detail {

// Parses one record starting at `pos`; handles quoted fields, escaped quotes,
// embedded newlines and CRLF terminators. Returns false at end of input.
inline bool parse_record(const std::string& text, std::size_t& pos,
                         std::vector<std::string>& out) {
    out.clear();
    if (pos >= text.size()) return false;
    std::string field;
    bool in_quotes = false;
    while (pos < text.size()) {
        const char c = text[pos];
        if (in_quotes) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    field.push_back('"');
                    pos += 2;
                } else {
                    in_quotes = false;
                    ++pos;
                }
            } else {
                field.push_back(c);
                ++pos;
            }
            continue;
        }
        if (c == '"') {
            if (!field.empty()) throw DataError("csv: quote inside unquoted field");
            in_quotes = true;
            ++pos;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
            ++pos;
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
            ++pos;
            out.push_back(std::move(field));
            return true;
        } else {
            field.push_back(c);
            ++pos;
        }
    }
    if (in_quotes) throw DataError("csv: unterminated quoted field");
    out.push_back(std::move(field));
    return true;
}

inline bool needs_quoting(const std::string& s) {
    for (char c : s)
        if (c == ',' || c == '"' || c == '\n' || c == '\r') return true;
    return false;
}

inline void write_field(std::string& out, const std::string& s) {
    if (!needs_quoting(s)) {
        out += s;
        return;
    }
    out.push_back('"');
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

}  // namespace csv_detail

inline CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::size_t pos = 0;
    std::vector<std::string> record;
    if (!csv_detail::parse_record(text, pos, record)) throw DataError("csv: empty input");
    table.header = record;
    while (csv_detail::parse_record(text, pos, record)) {
        if (record.size() == 1 && record[0].empty() && pos >= text.size()) break;  // trailing newline
        if (record.size() != table.header.size())
            throw DataError("csv: row " + std::to_string(table.rows.size() + 2) + " has " +
                            std::to_string(record.size()) + " fields, expected " +
                            std::to_string(table.header.size()));
        table.rows.push_back(record);
    }
    return table;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str());
}

inline std::string format_csv(const CsvTable& table) {
    std::string out;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (j) out.push_back(',');
        csv_detail::write_field(out, table.header[j]);
    }
    out.push_back('\n');
    for (const auto& row : table.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out.push_back(',');
            csv_detail::write_field(out, row[j]);
        }
        out.push_back('\n');
    }
    return out;
}

inline void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write file: " + path);
    out << format_csv(table);
}

// Shortest round-trip decimal representation; locale independent.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, bool& ok) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, v);
    ok = res.ec == std::errc{} && res.ptr == last && std::isfinite(v);
    return v;
}

}  // namespace cardicat
