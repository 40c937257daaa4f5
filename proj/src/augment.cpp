#include "predlab/augment.hpp"

#include <algorithm>
#include <random>

namespace predlab {

namespace {
constexpr std::uint64_t kShuffleStream = 0x94d049bb133111ebULL;
}

void AugmentSpec::validate() const {
    if (n_pos < 1) throw SpecError("window length must be >= 1");
    if (t0 < 0) throw SpecError("shift start must be >= 0");
    if (t0 >= n_pos) throw SpecError("shift start must be below the window length");
}

std::size_t augment_window_count(std::size_t n, const AugmentSpec& spec) {
    spec.validate();
    const auto need = static_cast<std::size_t>(spec.n_pos);
    const auto worst = static_cast<std::size_t>(spec.n_pos - 1);
    if (n < worst + need)
        throw SpecError("stream too short for a full window at every shift");
    return (n - worst) / need;
}

std::vector<std::size_t> augment_window_starts(std::size_t n, const AugmentSpec& spec,
                                               std::optional<std::uint64_t> shuffle_seed) {
    const std::size_t blocks = augment_window_count(n, spec);
    std::vector<std::size_t> starts;
    starts.reserve(blocks * static_cast<std::size_t>(spec.n_pos - spec.t0));
    for (std::size_t w = 0; w < blocks; ++w)
        for (int t = spec.t0; t < spec.n_pos; ++t)
            starts.push_back(static_cast<std::size_t>(t) +
                             w * static_cast<std::size_t>(spec.n_pos));
    if (shuffle_seed) {
        std::mt19937_64 g(mix64(*shuffle_seed ^ kShuffleStream));
        std::shuffle(starts.begin(), starts.end(), g);
    }
    return starts;
}

LabeledDataset augment(const LabeledDataset& d, const AugmentSpec& spec,
                       std::optional<std::uint64_t> shuffle_seed) {
    d.validate();
    LabeledDataset out;
    out.inputs.vocab = d.inputs.vocab;
    out.labels.vocab = d.labels.vocab;
    out.markov_order_hint = d.markov_order_hint;
    const auto w = static_cast<std::size_t>(spec.n_pos);
    for (std::size_t start : augment_window_starts(d.size(), spec, shuffle_seed))
        for (std::size_t i = start; i < start + w; ++i) {
            out.inputs.tokens.push_back(d.inputs.tokens[i]);
            out.labels.tokens.push_back(d.labels.tokens[i]);
        }
    return out;
}

double prop1_gain(std::size_t n, const AugmentSpec& spec) {
    spec.validate();
    if (n < 1) throw SpecError("dataset size must be >= 1");
    const double copies = static_cast<double>(spec.n_pos - spec.t0);
    return (1.0 - 1.0 / copies) / static_cast<double>(n);
}

}  // namespace predlab
