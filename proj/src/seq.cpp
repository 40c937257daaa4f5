#include "predlab/seq.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "predlab/kvfile.hpp"

namespace predlab {

Vocabulary::Vocabulary(int n, std::vector<std::string> symbol_names)
    : size(n), names(std::move(symbol_names)) {
    if (n < 2) throw std::invalid_argument("vocabulary size must be >= 2");
    if (!names.empty() && static_cast<int>(names.size()) != n)
        throw std::invalid_argument("vocabulary names must match size");
}

void TokenSequence::validate() const {
    for (int t : tokens)
        if (t < 0 || t >= vocab.size)
            throw std::invalid_argument("token " + std::to_string(t) +
                                        " outside vocabulary of size " +
                                        std::to_string(vocab.size));
}

void LabeledDataset::validate() const {
    if (inputs.size() != labels.size())
        throw std::invalid_argument("input and label streams differ in length");
    inputs.validate();
    labels.validate();
}

Distribution Distribution::uniform(int n) {
    Distribution d;
    d.probs.assign(static_cast<std::size_t>(n), 1.0 / n);
    return d;
}

Distribution Distribution::point_mass(int n, int at) {
    Distribution d;
    d.probs.assign(static_cast<std::size_t>(n), 0.0);
    d.probs.at(static_cast<std::size_t>(at)) = 1.0;
    return d;
}

void Distribution::validate() const {
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw std::invalid_argument("distribution has a negative entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("distribution entries sum to " + std::to_string(sum));
}

double log_loss(const Distribution& pred, int label, LogBase base) {
    if (label < 0 || label >= pred.size())
        throw std::invalid_argument("label " + std::to_string(label) +
                                    " out of range for prediction of size " +
                                    std::to_string(pred.size()));
    double p = pred.probs[static_cast<std::size_t>(label)];
    double nats = -std::log(std::max(p, kProbFloor));
    return from_nats(std::max(nats, 0.0), base);
}

double mean_log_loss(std::span<const Distribution> preds, std::span<const int> labels,
                     LogBase base) {
    if (preds.empty()) throw std::invalid_argument("mean_log_loss over empty stream");
    if (preds.size() != labels.size())
        throw std::invalid_argument("prediction and label streams differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        total += log_loss(preds[i], labels[i], LogBase::nats);
    return from_nats(total / static_cast<double>(preds.size()), base);
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& d,
                                                        double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("train_fraction must be in (0, 1)");
    const std::size_t n = d.size();
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));

    auto take = [&](std::size_t from, std::size_t to) {
        LabeledDataset part;
        part.inputs.vocab = d.inputs.vocab;
        part.labels.vocab = d.labels.vocab;
        part.markov_order_hint = d.markov_order_hint;
        part.inputs.tokens.assign(d.inputs.tokens.begin() + static_cast<std::ptrdiff_t>(from),
                                  d.inputs.tokens.begin() + static_cast<std::ptrdiff_t>(to));
        part.labels.tokens.assign(d.labels.tokens.begin() + static_cast<std::ptrdiff_t>(from),
                                  d.labels.tokens.begin() + static_cast<std::ptrdiff_t>(to));
        return part;
    };
    return {take(0, n_train), take(n_train, n)};
}

void save_tokens(const TokenSequence& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SpecError("cannot write " + path);
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
        if (i) out << ' ';
        out << s.tokens[i];
    }
    if (!out) throw SpecError("short write to " + path);
}

std::vector<int> load_token_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot read " + path);
    std::vector<int> tokens;
    long long v = 0;
    while (in >> v) tokens.push_back(static_cast<int>(v));
    if (!in.eof()) throw SpecError("malformed token file " + path);
    return tokens;
}

void save_dataset(const LabeledDataset& d, const std::string& base_path) {
    d.validate();
    save_tokens(d.inputs, base_path + ".x");
    save_tokens(d.labels, base_path + ".y");
    KvFile meta;
    meta.set("format", "predlab-dataset-v1");
    meta.set("n", std::to_string(d.size()));
    meta.set("input_vocab", std::to_string(d.inputs.vocab.size));
    meta.set("label_vocab", std::to_string(d.labels.vocab.size));
    if (d.markov_order_hint) meta.set("order_hint", std::to_string(*d.markov_order_hint));
    std::ofstream out(base_path + ".meta", std::ios::binary);
    if (!out) throw SpecError("cannot write " + base_path + ".meta");
    out << meta.to_string();
}

LabeledDataset load_dataset(const std::string& base_path) {
    KvFile meta = KvFile::parse_file(base_path + ".meta");
    if (meta.get_string("format") != "predlab-dataset-v1")
        throw SpecError("unrecognized dataset format in " + base_path + ".meta");
    LabeledDataset d;
    d.inputs.vocab = Vocabulary(static_cast<int>(meta.get_int("input_vocab")));
    d.labels.vocab = Vocabulary(static_cast<int>(meta.get_int("label_vocab")));
    d.inputs.tokens = load_token_file(base_path + ".x");
    d.labels.tokens = load_token_file(base_path + ".y");
    if (meta.has("order_hint")) d.markov_order_hint = static_cast<int>(meta.get_int("order_hint"));
    const auto n = static_cast<std::size_t>(meta.get_int("n"));
    if (d.size() != n || d.labels.size() != n)
        throw SpecError("dataset length does not match header in " + base_path);
    d.validate();
    return d;
}

}  // namespace predlab
