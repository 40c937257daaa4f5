#pragma once

#include <string>
#include <vector>

#include "predlab/common.hpp"

namespace predlab {

// Comma-separated results with a fixed version stamp on the first line.
// Quoting follows the usual rules: fields holding commas, quotes, or
// newlines are wrapped in double quotes with inner quotes doubled.
inline constexpr std::string_view kCsvVersionLine = "# predlab-csv v1";

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int column_index(const std::string& name) const;  // throws when absent
    const std::string& at(std::size_t row, int col) const;
    double number_at(std::size_t row, int col) const;
};

std::string csv_escape(const std::string& field);
std::string format_double(double v);  // shortest text that parses back exactly

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& t);

// Appends one row, creating the file with the version line and header on
// first use. An existing file must carry the same columns.
void append_csv_row(const std::string& path, const std::vector<std::string>& columns,
                    const std::vector<std::string>& fields);

}  // namespace predlab
