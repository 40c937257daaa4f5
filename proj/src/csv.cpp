#include "predlab/csv.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace predlab {

int CsvTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    throw SpecError("no such column '" + name + "'");
}

const std::string& CsvTable::at(std::size_t row, int col) const {
    if (row >= rows.size() || col < 0 || static_cast<std::size_t>(col) >= columns.size())
        throw SpecError("csv cell out of range");
    return rows[row][static_cast<std::size_t>(col)];
}

double CsvTable::number_at(std::size_t row, int col) const {
    const std::string& s = at(row, col);
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw SpecError("trailing junk in number '" + s + "'");
        return v;
    } catch (const std::invalid_argument&) {
        throw SpecError("not a number: '" + s + "'");
    } catch (const std::out_of_range&) {
        throw SpecError("number out of range: '" + s + "'");
    }
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::vector<std::string> parse_line(const std::string& line, const std::string& origin) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw SpecError("unterminated quote in " + origin);
    fields.push_back(std::move(cur));
    return fields;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << csv_escape(fields[i]);
    }
    out << '\n';
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != kCsvVersionLine)
        throw SpecError(path + " is not a recognized results file");
    CsvTable t;
    if (!std::getline(in, line)) throw SpecError(path + " has no header row");
    t.columns = parse_line(strip_cr(line), path);
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        auto fields = parse_line(line, path);
        if (fields.size() != t.columns.size())
            throw SpecError(path + ": row with " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(t.columns.size()));
        t.rows.push_back(std::move(fields));
    }
    return t;
}

void write_csv(const std::string& path, const CsvTable& t) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw SpecError("cannot write " + path);
    out << kCsvVersionLine << '\n';
    write_row(out, t.columns);
    for (const auto& row : t.rows) {
        if (row.size() != t.columns.size()) throw SpecError("ragged csv row");
        write_row(out, row);
    }
    if (!out) throw SpecError("short write to " + path);
}

void append_csv_row(const std::string& path, const std::vector<std::string>& columns,
                    const std::vector<std::string>& fields) {
    if (fields.size() != columns.size()) throw SpecError("ragged csv row");
    if (!std::filesystem::exists(path)) {
        CsvTable t;
        t.columns = columns;
        t.rows.push_back(fields);
        write_csv(path, t);
        return;
    }
    {
        std::ifstream in(path);
        std::string line;
        if (!std::getline(in, line) || strip_cr(line) != kCsvVersionLine)
            throw SpecError(path + " is not a recognized results file");
        if (!std::getline(in, line)) throw SpecError(path + " has no header row");
        if (parse_line(strip_cr(line), path) != columns)
            throw SpecError(path + " has a different column set");
    }
    std::ofstream out(path, std::ios::app);
    if (!out) throw SpecError("cannot append to " + path);
    write_row(out, fields);
    if (!out) throw SpecError("short write to " + path);
}

}  // namespace predlab
