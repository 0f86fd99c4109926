#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldl/value.hpp"

namespace ldl {

struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace csv {

// Minimal RFC-ish reader: comma separated, double-quoted fields with ""
// escapes, UTF-8 passed through. Returns rows of raw strings.
inline std::vector<std::vector<std::string>> read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open CSV file: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> row;
        std::string field;
        bool quoted = false;
        for (size_t i = 0; i < line.size(); ++i) {
            char c = line[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        field += '"';
                        ++i;
                    } else {
                        quoted = false;
                    }
                } else {
                    field += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                row.push_back(std::move(field));
                field.clear();
            } else {
                field += c;
            }
        }
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline bool looks_like_int(const std::string& s) {
    if (s.empty()) return false;
    size_t i = s[0] == '-' ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit((unsigned char)s[i])) return false;
    return true;
}

inline bool looks_like_float(const std::string& s) {
    char* end = nullptr;
    if (s.empty()) return false;
    std::strtod(s.c_str(), &end);
    return end && *end == '\0';
}

// Schema-driven typing; `any` infers int, then float, else string.
inline Value typed_value(const std::string& raw, const std::string& type, size_t row,
                         const std::string& column) {
    if (type == "int") {
        if (!looks_like_int(raw))
            throw CsvError("row " + std::to_string(row) + ", column " + column +
                           ": expected an integer, got '" + raw + "'");
        return Value::integer(mpz_class(raw, 10));
    }
    if (type == "float") {
        if (!looks_like_float(raw))
            throw CsvError("row " + std::to_string(row) + ", column " + column +
                           ": expected a number, got '" + raw + "'");
        return Value::real(std::stod(raw));
    }
    if (type == "string") return Value::str(raw);
    if (looks_like_int(raw)) return Value::integer(mpz_class(raw, 10));
    if (looks_like_float(raw)) return Value::real(std::stod(raw));
    return Value::str(raw);
}

}  // namespace csv

}  // namespace ldl
