#include "predlab/kvfile.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace predlab {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void bad(const std::string& origin, std::size_t line_no, const std::string& what) {
    throw SpecError(origin + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

KvFile KvFile::parse_string(const std::string& text, const std::string& origin) {
    KvFile kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) bad(origin, line_no, "expected key=value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) bad(origin, line_no, "empty key");
        if (kv.entries_.count(key)) bad(origin, line_no, "duplicate key '" + key + "'");
        kv.entries_.emplace(std::move(key), std::move(value));
    }
    return kv;
}

KvFile KvFile::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

void KvFile::set(const std::string& key, const std::string& value) {
    entries_[key] = value;
}

const std::string& KvFile::get_string(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw SpecError(origin_ + ": missing key '" + key + "'");
    return it->second;
}

std::string KvFile::get_string_or(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

long long KvFile::parse_int_token(const std::string& token, const std::string& context) {
    std::string t = trim(token);
    if (t.empty()) throw SpecError(context + ": empty integer");
    std::size_t caret = t.find('^');
    try {
        if (caret != std::string::npos) {
            long long base = std::stoll(t.substr(0, caret));
            long long exp = std::stoll(t.substr(caret + 1));
            if (base != 2 || exp < 0 || exp > 62)
                throw SpecError(context + ": unsupported power '" + t + "'");
            return 1LL << exp;
        }
        std::size_t used = 0;
        long long v = std::stoll(t, &used);
        if (used != t.size()) throw SpecError(context + ": trailing junk in '" + t + "'");
        return v;
    } catch (const SpecError&) {
        throw;
    } catch (const std::exception&) {
        throw SpecError(context + ": not an integer: '" + t + "'");
    }
}

long long KvFile::get_int(const std::string& key) const {
    return parse_int_token(get_string(key), origin_ + ": key '" + key + "'");
}

long long KvFile::get_int_or(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

double KvFile::get_double(const std::string& key) const {
    const std::string& raw = get_string(key);
    std::string t = trim(raw);
    try {
        if (t.find('^') != std::string::npos)
            return static_cast<double>(parse_int_token(t, origin_ + ": key '" + key + "'"));
        std::size_t used = 0;
        double v = std::stod(t, &used);
        if (used != t.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const SpecError&) {
        throw;
    } catch (const std::exception&) {
        throw SpecError(origin_ + ": key '" + key + "': not a number: '" + raw + "'");
    }
}

double KvFile::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool KvFile::get_bool(const std::string& key) const {
    std::string v = trim(get_string(key));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw SpecError(origin_ + ": key '" + key + "': not a boolean: '" + v + "'");
}

bool KvFile::get_bool_or(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::vector<std::string> KvFile::split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(value);
    while (std::getline(in, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

std::vector<long long> KvFile::get_int_list(const std::string& key) const {
    const std::string context = origin_ + ": key '" + key + "'";
    std::vector<long long> out;
    for (const std::string& tok : split_list(get_string(key))) {
        std::size_t dots = tok.find("..");
        if (dots != std::string::npos) {
            long long lo = parse_int_token(tok.substr(0, dots), context);
            long long hi = parse_int_token(tok.substr(dots + 2), context);
            if (lo > hi) throw SpecError(context + ": descending range '" + tok + "'");
            if (hi - lo > 1'000'000) throw SpecError(context + ": range too large '" + tok + "'");
            for (long long v = lo; v <= hi; ++v) out.push_back(v);
        } else {
            out.push_back(parse_int_token(tok, context));
        }
    }
    if (out.empty()) throw SpecError(context + ": empty list");
    return out;
}

std::vector<double> KvFile::get_double_list(const std::string& key) const {
    const std::string context = origin_ + ": key '" + key + "'";
    std::vector<double> out;
    for (const std::string& tok : split_list(get_string(key))) {
        try {
            if (tok.find('^') != std::string::npos) {
                out.push_back(static_cast<double>(parse_int_token(tok, context)));
                continue;
            }
            std::size_t used = 0;
            double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument("trailing junk");
            out.push_back(v);
        } catch (const SpecError&) {
            throw;
        } catch (const std::exception&) {
            throw SpecError(context + ": not a number: '" + tok + "'");
        }
    }
    if (out.empty()) throw SpecError(context + ": empty list");
    return out;
}

std::vector<std::string> KvFile::get_string_list(const std::string& key) const {
    auto out = split_list(get_string(key));
    if (out.empty()) throw SpecError(origin_ + ": key '" + key + "': empty list");
    return out;
}

void KvFile::require_keys(const std::set<std::string>& required,
                          const std::set<std::string>& optional) const {
    std::string missing, unknown;
    for (const auto& k : required)
        if (!has(k)) missing += (missing.empty() ? "" : ", ") + k;
    for (const auto& [k, v] : entries_)
        if (!required.count(k) && !optional.count(k))
            unknown += (unknown.empty() ? "" : ", ") + k;
    if (!missing.empty() || !unknown.empty()) {
        std::string msg = origin_ + ":";
        if (!missing.empty()) msg += " missing required keys: " + missing + ".";
        if (!unknown.empty()) msg += " unknown keys: " + unknown + ".";
        throw SpecError(msg);
    }
}

std::string KvFile::to_string() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
}

}  // namespace predlab
