#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "predlab/common.hpp"

namespace predlab {

struct Vocabulary {
    int size = 2;
    std::vector<std::string> names;  // optional; empty or one per symbol

    Vocabulary() = default;
    explicit Vocabulary(int n, std::vector<std::string> symbol_names = {});

    bool operator==(const Vocabulary& o) const { return size == o.size; }
};

struct TokenSequence {
    std::vector<int> tokens;
    Vocabulary vocab;

    std::size_t size() const { return tokens.size(); }
    void validate() const;  // every token in [0, vocab.size)
};

// Parallel input/label streams; label vocab may differ from input vocab.
struct LabeledDataset {
    TokenSequence inputs;
    TokenSequence labels;
    std::optional<int> markov_order_hint;

    std::size_t size() const { return inputs.size(); }
    void validate() const;  // equal lengths, both streams valid
};

struct Distribution {
    std::vector<double> probs;

    int size() const { return static_cast<int>(probs.size()); }
    static Distribution uniform(int n);
    static Distribution point_mass(int n, int at);
    void validate() const;  // entries >= 0, sum within 1e-9 of 1
};

// -log(max(p[label], 1e-12)); never negative, never infinite.
double log_loss(const Distribution& pred, int label, LogBase base);

double mean_log_loss(std::span<const Distribution> preds, std::span<const int> labels,
                     LogBase base);

// Prefix split (no shuffling; the streams are temporally ordered).
// Train part takes floor(size * train_fraction) leading positions.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& d,
                                                        double train_fraction);

// Dataset files: <base>.x and <base>.y hold space-separated symbol ids with
// no newline; <base>.meta is a small key=value header.
void save_dataset(const LabeledDataset& d, const std::string& base_path);
LabeledDataset load_dataset(const std::string& base_path);

void save_tokens(const TokenSequence& s, const std::string& path);
std::vector<int> load_token_file(const std::string& path);

}  // namespace predlab
