// Copyright 2026 The metalic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/// Versioned CSV files.
///
/// Every file starts with the line `schema_version,<N>` followed by a header row. Readers reject
/// any other version. Reals are written in shortest round-trip form, so a file reads back exactly.

#include "metalic/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metalic {

constexpr int kSchemaVersion = 1;

/// Shortest text that round-trips the double exactly.
inline std::string format_real(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(&os), width_(header.size()) {
        *os_ << "schema_version," << kSchemaVersion << '\n';
        write_row(header);
    }

    CsvWriter& operator<<(double v) { return cell(format_real(v)); }
    CsvWriter& operator<<(int v) { return cell(std::to_string(v)); }
    CsvWriter& operator<<(long v) { return cell(std::to_string(v)); }
    CsvWriter& operator<<(long long v) { return cell(std::to_string(v)); }
    CsvWriter& operator<<(unsigned long v) { return cell(std::to_string(v)); }
    CsvWriter& operator<<(unsigned long long v) { return cell(std::to_string(v)); }
    CsvWriter& operator<<(const std::string& v) { return cell(v); }
    CsvWriter& operator<<(const char* v) { return cell(v); }

    /// Close the current row; the number of cells must equal the header width.
    void end_row() {
        if (col_ != width_) {
            throw std::logic_error("CsvWriter: row has " + std::to_string(col_) + " cells, header has " +
                                   std::to_string(width_));
        }
        *os_ << '\n';
        col_ = 0;
    }

private:
    void write_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) *os_ << (i ? "," : "") << cells[i];
        *os_ << '\n';
    }
    CsvWriter& cell(const std::string& s) {
        *os_ << (col_ ? "," : "") << s;
        ++col_;
        return *this;
    }

    std::ostream* os_;
    std::size_t width_;
    std::size_t col_ = 0;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column position of `name`; throws SchemaError when absent.
    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw SchemaError("csv: missing column '" + std::string(name) + "'");
    }
    double real(std::size_t row, std::string_view name) const { return std::stod(rows.at(row).at(column(name))); }
    const std::string& text(std::size_t row, std::string_view name) const { return rows.at(row).at(column(name)); }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline CsvTable read_csv(std::istream& in, const std::string& what = "csv") {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(what + ": empty file");
    const auto first = split_csv_line(line);
    if (first.size() != 2 || first[0] != "schema_version") {
        throw SchemaError(what + ": missing schema_version line");
    }
    if (first[1] != std::to_string(kSchemaVersion)) {
        throw SchemaError(what + ": schema_version " + first[1] + " is not supported (expected " +
                          std::to_string(kSchemaVersion) + ")");
    }
    CsvTable t;
    if (!std::getline(in, line)) throw SchemaError(what + ": missing header row");
    t.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto row = split_csv_line(line);
        if (row.size() != t.header.size()) {
            throw SchemaError(what + ": row with " + std::to_string(row.size()) + " cells, header has " +
                              std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError(path + ": cannot open");
    return read_csv(in, path);
}

}  // namespace metalic
