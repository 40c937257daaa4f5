#include "predlab/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace predlab {

Tokenizer tokenizer_from_string(const std::string& s) {
    if (s == "char") return Tokenizer::character;
    if (s == "whitespace") return Tokenizer::whitespace;
    throw SpecError("unknown tokenizer '" + s + "'");
}

std::string to_string(Tokenizer t) {
    return t == Tokenizer::character ? "char" : "whitespace";
}

namespace {

std::vector<std::string> split_tokens(const std::string& text, Tokenizer tok) {
    std::vector<std::string> out;
    if (tok == Tokenizer::character) {
        out.reserve(text.size());
        for (char c : text) out.emplace_back(1, c);
        return out;
    }
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

LabeledDataset ingest_text(const std::string& text, Tokenizer tok, int vocab_cap) {
    if (vocab_cap < 1) throw SpecError("vocabulary cap must be >= 1");
    const std::vector<std::string> toks = split_tokens(text, tok);
    if (toks.size() < 2) throw SpecError("corpus needs at least two tokens");

    struct Info {
        long long count = 0;
        std::size_t first = 0;
    };
    std::unordered_map<std::string, Info> stats;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        auto [it, fresh] = stats.try_emplace(toks[i]);
        if (fresh) it->second.first = i;
        ++it->second.count;
    }
    std::vector<const std::pair<const std::string, Info>*> ranked;
    ranked.reserve(stats.size());
    for (const auto& kv : stats) ranked.push_back(&kv);
    std::sort(ranked.begin(), ranked.end(), [](const auto* a, const auto* b) {
        if (a->second.count != b->second.count) return a->second.count > b->second.count;
        return a->second.first < b->second.first;
    });

    // the last id is reserved for out-of-vocabulary tokens
    const int keep = std::min(static_cast<int>(ranked.size()), vocab_cap - 1);
    std::unordered_map<std::string, int> id_of;
    std::vector<std::string> names;
    for (int i = 0; i < keep; ++i) {
        id_of.emplace(ranked[static_cast<std::size_t>(i)]->first, i);
        names.push_back(ranked[static_cast<std::size_t>(i)]->first);
    }
    const int unk = keep;
    names.push_back("<unk>");
    const int vocab_size = std::max(keep + 1, 2);
    while (static_cast<int>(names.size()) < vocab_size) names.push_back("<pad>");

    std::vector<int> ids;
    ids.reserve(toks.size());
    for (const std::string& t : toks) {
        auto it = id_of.find(t);
        ids.push_back(it == id_of.end() ? unk : it->second);
    }

    LabeledDataset d;
    d.inputs.vocab = Vocabulary(vocab_size, names);
    d.labels.vocab = Vocabulary(vocab_size, names);
    d.inputs.tokens.assign(ids.begin(), ids.end() - 1);
    d.labels.tokens.assign(ids.begin() + 1, ids.end());
    d.validate();
    return d;
}

LabeledDataset ingest_corpus(const std::string& path, Tokenizer tok, int vocab_cap) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot read corpus " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return ingest_text(buf.str(), tok, vocab_cap);
}

}  // namespace predlab
