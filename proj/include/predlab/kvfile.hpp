#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "predlab/common.hpp"

namespace predlab {

// Flat key=value config. `#` starts a comment, blank lines are skipped,
// duplicate keys are rejected. Integer fields accept `2^k` powers and
// list fields additionally accept `a..b` inclusive ranges.
class KvFile {
public:
    static KvFile parse_string(const std::string& text, const std::string& origin = "<string>");
    static KvFile parse_file(const std::string& path);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    void set(const std::string& key, const std::string& value);

    const std::string& get_string(const std::string& key) const;
    std::string get_string_or(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int_or(const std::string& key, long long fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool_or(const std::string& key, bool fallback) const;
    std::vector<long long> get_int_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<std::string> get_string_list(const std::string& key) const;

    // Throws if any present key falls outside `known`; lists missing required keys too.
    void require_keys(const std::set<std::string>& required,
                      const std::set<std::string>& optional) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }
    std::string to_string() const;

    static long long parse_int_token(const std::string& token, const std::string& context);
    static std::vector<std::string> split_list(const std::string& value);

private:
    std::map<std::string, std::string> entries_;
    std::string origin_ = "<empty>";
};

}  // namespace predlab
