#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "predlab/kvfile.hpp"
#include "predlab/seq.hpp"

namespace predlab {

// Order-l source: inputs drawn i.i.d. from input_law, label at position i drawn
// from label_rule applied to the window (x_{max(0,i-l+1)}, ..., x_i), oldest first.
// Positions near the stream start see the available prefix only.
struct SourceSpec {
    int order = 1;
    Vocabulary input_vocab;
    Vocabulary label_vocab;
    Distribution input_law;
    std::function<Distribution(std::span<const int>)> label_rule;
    std::string id;  // canonical "name key=value ..." tag used in logs and journals

    void validate() const;
};

// label = 1 iff the window sum reaches the threshold (default: half the order, rounded up)
SourceSpec bool_sum_source(int l, int threshold = -1);
// bool_sum with the label flipped with probability `flip`
SourceSpec noisy_bool_sum_source(int l, double flip, int threshold = -1);
// label = the window read as a binary number, oldest bit most significant;
// at short windows the missing high bits count as zero
SourceSpec bin2dec_source(int l);
// every window gets an arbitrary but reproducible label distribution drawn from table_seed
SourceSpec random_table_source(int l, std::uint64_t table_seed, int input_vocab_size = 2,
                               int label_vocab_size = 2);

// Spec-file constructor. Keys: source (bool_sum|noisy_bool_sum|bin2dec|random_table),
// l, and per-source parameters threshold / flip / table_seed / input_vocab / label_vocab.
SourceSpec source_from_kv(const KvFile& kv);

int sample_index(const Distribution& d, std::mt19937_64& g);

LabeledDataset generate(const SourceSpec& spec, std::size_t n, std::uint64_t seed);

// Stationary joint law of (suffix, label) where suffix = the last k inputs.
// Built by enumerating all |X|^max(k,l) input windows and marginalizing the
// symbols older than the suffix. Suffix ids are base-|X| numerals, oldest
// symbol in the highest digit.
struct SuffixJoint {
    int k = 0;
    int input_vocab = 2;
    int label_count = 2;
    long long suffix_count = 1;
    std::vector<double> joint;        // [suffix * label_count + y]
    std::vector<double> suffix_prob;  // [suffix]

    void decode_suffix(long long id, std::span<int> out) const;
};

SuffixJoint suffix_conditional(const SourceSpec& spec, int k,
                               long long budget = kDefaultEnumBudget);

// H(Y_k | X_k..X_1) in the stationary regime, by exact enumeration.
double exact_conditional_entropy(const SourceSpec& spec, int k, LogBase base,
                                 long long budget = kDefaultEnumBudget);

// H(Y_k | group(X_k..X_1)): entropy conditioned on a coarsening of the window.
double exact_grouped_entropy(const SourceSpec& spec, int k,
                             const std::function<long long(std::span<const int>)>& group,
                             LogBase base, long long budget = kDefaultEnumBudget);

// Asymptotic optimal test loss for a span-k predictor on this source:
// the conditional entropy at window length min(l, k).
double theorem1_limit(const SourceSpec& spec, int k, LogBase base,
                      long long budget = kDefaultEnumBudget);

}  // namespace predlab
