#include "predlab/fsmp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

#include "predlab/binio.hpp"

namespace predlab {

namespace {

constexpr std::string_view kCountMagic = "PLCOUNT1";

long long pow_ll(int base, int exp) {
    long long v = 1;
    for (int i = 0; i < exp; ++i) {
        if (v > (1LL << 62) / base) throw CapacityError("state space overflow");
        v *= base;
    }
    return v;
}

}  // namespace

void StateFunction::validate() const {
    if (span < 0) throw SpecError("state function span must be >= 0");
    if (state_count < 1) throw SpecError("state function must have at least one state");
    if (!map) throw SpecError("state function has no map");
}

StateFunction StateFunction::identity(int span, int input_vocab) {
    if (span < 0 || input_vocab < 2) throw SpecError("bad identity state function parameters");
    StateFunction f;
    f.span = span;
    f.name = "identity";
    if (span == 0) {
        f.state_count = 1;
        f.map = [](std::span<const int>) { return 0LL; };
        return f;
    }
    // windows of length w in [1, span] occupy a block of |X|^w ids each
    auto offsets = std::make_shared<std::vector<long long>>();
    offsets->push_back(0);
    long long count = 0;
    for (int w = 1; w <= span; ++w) {
        count += pow_ll(input_vocab, w);
        offsets->push_back(count);
    }
    f.state_count = count;
    f.map = [offsets, input_vocab](std::span<const int> w) {
        long long value = 0;
        for (int x : w) value = value * input_vocab + x;
        return (*offsets)[w.size() - 1] + value;
    };
    return f;
}

StateFunction StateFunction::window_sum(int span, int input_vocab) {
    if (span < 0 || input_vocab < 2) throw SpecError("bad window-sum state function parameters");
    StateFunction f;
    f.span = span;
    f.name = "window_sum";
    f.state_count = static_cast<long long>(span) * (input_vocab - 1) + 1;
    f.map = [](std::span<const int> w) {
        long long sum = 0;
        for (int x : w) sum += x;
        return sum;
    };
    return f;
}

StateFunction StateFunction::custom(int span, long long state_count,
                                    std::function<long long(std::span<const int>)> map,
                                    std::string name) {
    StateFunction f;
    f.span = span;
    f.state_count = state_count;
    f.map = std::move(map);
    f.name = std::move(name);
    f.validate();
    return f;
}

CountTable::CountTable(long long state_count, int label_count)
    : state_count_(state_count), label_count_(label_count) {
    if (state_count < 1 || label_count < 2) throw SpecError("bad count table dimensions");
    dense_storage_ = state_count <= kDenseLimit / label_count;
    if (dense_storage_) {
        cells_.assign(static_cast<std::size_t>(state_count * label_count), 0);
        marginals_.assign(static_cast<std::size_t>(state_count), 0);
    }
}

void CountTable::check(long long state, int label) const {
    if (state < 0 || state >= state_count_)
        throw SpecError("state id " + std::to_string(state) + " outside [0, " +
                        std::to_string(state_count_) + ")");
    if (label < 0 || label >= label_count_)
        throw SpecError("label " + std::to_string(label) + " outside [0, " +
                        std::to_string(label_count_) + ")");
}

void CountTable::add(long long state, int label, long long c) {
    check(state, label);
    if (c < 0) throw SpecError("negative count increment");
    if (dense_storage_) {
        cells_[static_cast<std::size_t>(state * label_count_ + label)] += c;
        marginals_[static_cast<std::size_t>(state)] += c;
    } else {
        sparse_[state * label_count_ + label] += c;
        sparse_marginals_[state] += c;
    }
    total_ += c;
}

long long CountTable::joint(long long state, int label) const {
    check(state, label);
    if (dense_storage_) return cells_[static_cast<std::size_t>(state * label_count_ + label)];
    auto it = sparse_.find(state * label_count_ + label);
    return it == sparse_.end() ? 0 : it->second;
}

long long CountTable::marginal(long long state) const {
    check(state, 0);
    if (dense_storage_) return marginals_[static_cast<std::size_t>(state)];
    auto it = sparse_marginals_.find(state);
    return it == sparse_marginals_.end() ? 0 : it->second;
}

std::vector<std::pair<long long, long long>> CountTable::nonzero() const {
    std::vector<std::pair<long long, long long>> out;
    if (dense_storage_) {
        for (std::size_t i = 0; i < cells_.size(); ++i)
            if (cells_[i] != 0) out.emplace_back(static_cast<long long>(i), cells_[i]);
    } else {
        out.assign(sparse_.begin(), sparse_.end());
        std::sort(out.begin(), out.end());
    }
    return out;
}

void save_count_table(const CountTable& t, int span, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SpecError("cannot write " + path);
    binio::write_magic(out, kCountMagic);
    binio::write_pod<std::uint32_t>(out, 1);
    binio::write_pod<std::uint8_t>(out, t.dense() ? 1 : 0);
    binio::write_pod<std::int64_t>(out, span);
    binio::write_pod<std::int64_t>(out, t.state_count());
    binio::write_pod<std::int32_t>(out, t.label_count());
    binio::write_pod<std::int64_t>(out, t.total());
    auto entries = t.nonzero();
    binio::write_pod<std::uint64_t>(out, entries.size());
    for (const auto& [key, count] : entries) {
        binio::write_pod<std::int64_t>(out, key);
        binio::write_pod<std::int64_t>(out, count);
    }
    if (!out) throw SpecError("short write to " + path);
}

std::pair<CountTable, int> load_count_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot read " + path);
    binio::expect_magic(in, kCountMagic);
    auto version = binio::read_pod<std::uint32_t>(in);
    if (version != 1) throw SpecError("unsupported count table version in " + path);
    binio::read_pod<std::uint8_t>(in);
    auto span = binio::read_pod<std::int64_t>(in);
    auto states = binio::read_pod<std::int64_t>(in);
    auto labels = binio::read_pod<std::int32_t>(in);
    auto total = binio::read_pod<std::int64_t>(in);
    CountTable t(states, labels);
    auto n_entries = binio::read_pod<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < n_entries; ++i) {
        auto key = binio::read_pod<std::int64_t>(in);
        auto count = binio::read_pod<std::int64_t>(in);
        t.add(key / labels, static_cast<int>(key % labels), count);
    }
    if (t.total() != total) throw SpecError("count table totals disagree in " + path);
    return {std::move(t), static_cast<int>(span)};
}

BayesEstimator::BayesEstimator(StateFunction fn, int label_count, double alpha)
    : fallback(Distribution::uniform(label_count)),
      fn_(std::move(fn)),
      counts_(fn_.state_count, label_count),
      alpha_(alpha) {
    fn_.validate();
    if (alpha < 0.0) throw SpecError("smoothing must be non-negative");
}

BayesEstimator BayesEstimator::fit(StateFunction fn, const LabeledDataset& d, double alpha,
                                   bool include_warmup) {
    if (d.size() == 0) throw SpecError("cannot fit on an empty dataset");
    d.validate();
    BayesEstimator est(std::move(fn), d.labels.vocab.size, alpha);
    const auto& fn_ref = est.fn_;
    std::span<const int> stream(d.inputs.tokens);
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto w = clipped_window(stream, i, fn_ref.span);
        if (!include_warmup && w.size() < static_cast<std::size_t>(fn_ref.span)) continue;
        est.counts_.add(fn_ref.map(w), d.labels.tokens[i]);
    }
    return est;
}

Distribution BayesEstimator::predict_state(long long state) const {
    const int nl = counts_.label_count();
    const double denom = static_cast<double>(counts_.marginal(state)) + alpha_ * nl;
    if (denom <= 0.0) return fallback;
    Distribution d;
    d.probs.resize(static_cast<std::size_t>(nl));
    for (int y = 0; y < nl; ++y)
        d.probs[static_cast<std::size_t>(y)] =
            (static_cast<double>(counts_.joint(state, y)) + alpha_) / denom;
    return d;
}

Distribution BayesEstimator::predict(std::span<const int> window) const {
    if (window.size() > static_cast<std::size_t>(fn_.span))
        throw SpecError("window longer than the state function span");
    return predict_state(fn_.map(window));
}

double BayesEstimator::empirical_test_loss(const LabeledDataset& d_test, LogBase base) const {
    if (d_test.size() == 0) throw SpecError("empty test set");
    std::span<const int> stream(d_test.inputs.tokens);
    double total = 0.0;
    for (std::size_t i = 0; i < d_test.size(); ++i) {
        Distribution p = predict(clipped_window(stream, i, fn_.span));
        total += log_loss(p, d_test.labels.tokens[i], LogBase::nats);
    }
    return from_nats(total / static_cast<double>(d_test.size()), base);
}

double exact_expected_test_loss(const BayesEstimator& est, const SourceSpec& spec,
                                LogBase base, long long budget) {
    SuffixJoint sj = suffix_conditional(spec, est.state_fn().span, budget);
    std::vector<int> w(static_cast<std::size_t>(sj.k));
    double loss = 0.0;
    for (long long s = 0; s < sj.suffix_count; ++s) {
        if (sj.suffix_prob[static_cast<std::size_t>(s)] <= 0.0) continue;
        sj.decode_suffix(s, w);
        Distribution q = est.predict(w);
        const double* row = sj.joint.data() + s * sj.label_count;
        for (int y = 0; y < sj.label_count; ++y)
            if (row[y] > 0.0) loss += row[y] * log_loss(q, y, LogBase::nats);
    }
    return from_nats(loss, base);
}

LossDecomposition loss_decomposition(const BayesEstimator& est, const SourceSpec& spec,
                                     LogBase base, long long budget) {
    SuffixJoint sj = suffix_conditional(spec, est.state_fn().span, budget);
    std::vector<int> w(static_cast<std::size_t>(sj.k));
    // collapse suffixes sharing a state, so the entropy term conditions on the
    // estimator's own state variable
    std::unordered_map<long long, std::vector<double>> by_state;
    for (long long s = 0; s < sj.suffix_count; ++s) {
        if (sj.suffix_prob[static_cast<std::size_t>(s)] <= 0.0) continue;
        sj.decode_suffix(s, w);
        auto& row = by_state[est.state_fn().map(w)];
        row.resize(static_cast<std::size_t>(sj.label_count), 0.0);
        const double* src = sj.joint.data() + s * sj.label_count;
        for (int y = 0; y < sj.label_count; ++y) row[static_cast<std::size_t>(y)] += src[y];
    }
    double entropy = 0.0, cross = 0.0;
    for (const auto& [state, row] : by_state) {
        double ps = 0.0;
        for (double v : row) ps += v;
        if (ps <= 0.0) continue;
        Distribution q = est.predict_state(state);
        for (int y = 0; y < sj.label_count; ++y) {
            double pj = row[static_cast<std::size_t>(y)];
            if (pj <= 0.0) continue;
            entropy += pj * std::log(ps / pj);
            cross += pj * log_loss(q, y, LogBase::nats);
        }
    }
    return {from_nats(std::max(entropy, 0.0), base), from_nats(cross - entropy, base)};
}

}  // namespace predlab
