#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "predlab/seq.hpp"

namespace predlab {

// Translation augmentation: train on the same stream shifted by every offset
// t in [t0, n_pos - 1], so each token meets n_pos - t0 distinct positions
// while the consumer's positional encodings stay fixed.
struct AugmentSpec {
    int t0 = 0;
    int n_pos = 32;  // tokens per training window in the consumer

    void validate() const;
};

// Full windows available at every shift. Each copy is truncated to this count
// so all copies cover the same number of windows; needs n_pos - 1 spare tokens
// past the last full base window.
std::size_t augment_window_count(std::size_t n, const AugmentSpec& spec);

// Window start offsets into the original stream, round-robin over the shifts
// (block 0 of every shift, then block 1, ...). A seed shuffles them instead.
std::vector<std::size_t> augment_window_starts(
    std::size_t n, const AugmentSpec& spec,
    std::optional<std::uint64_t> shuffle_seed = {});

// The shifted copies materialized as one stream of concatenated windows, in
// augment_window_starts order.
LabeledDataset augment(const LabeledDataset& d, const AugmentSpec& spec,
                       std::optional<std::uint64_t> shuffle_seed = {});

// Excess-loss reduction rate from augmenting: (1/n) * (1 - 1/(n_pos - t0)).
double prop1_gain(std::size_t n, const AugmentSpec& spec);

}  // namespace predlab
