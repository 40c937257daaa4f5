#include "predlab/markov.hpp"

#include <cmath>
#include <cstring>
#include <unordered_map>

namespace predlab {

namespace {

constexpr std::uint64_t kInputStream = 0x1f123bb5159a55e5ULL;
constexpr std::uint64_t kLabelStream = 0x5851f42d4c957f2dULL;

long long checked_pow(int base, int exp, long long budget, const char* what) {
    long long v = 1;
    for (int i = 0; i < exp; ++i) {
        if (v > budget / base)
            throw CapacityError(std::string(what) + ": " + std::to_string(base) + "^" +
                                std::to_string(exp) + " states exceed budget " +
                                std::to_string(budget));
        v *= base;
    }
    return v;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

void SourceSpec::validate() const {
    if (order < 1) throw SpecError("source order must be >= 1");
    if (static_cast<int>(input_law.size()) != input_vocab.size)
        throw SpecError("input law size does not match input vocabulary");
    input_law.validate();
    if (!label_rule) throw SpecError("source has no label rule");
    std::vector<int> probe(static_cast<std::size_t>(order), 0);
    for (int len : {1, order}) {
        Distribution d = label_rule(std::span<const int>(probe.data(),
                                                         static_cast<std::size_t>(len)));
        if (d.size() != static_cast<std::size_t>(label_vocab.size))
            throw SpecError("label rule output size does not match label vocabulary");
        d.validate();
    }
}

SourceSpec bool_sum_source(int l, int threshold) {
    if (l < 1) throw SpecError("bool_sum order must be >= 1");
    if (threshold < 0) threshold = (l + 1) / 2;
    if (threshold > l) throw SpecError("bool_sum threshold exceeds order");
    SourceSpec s;
    s.order = l;
    s.input_vocab = Vocabulary(2);
    s.label_vocab = Vocabulary(2);
    s.input_law = Distribution::uniform(2);
    s.label_rule = [threshold](std::span<const int> w) {
        int sum = 0;
        for (int x : w) sum += x;
        return Distribution::point_mass(2, sum >= threshold ? 1 : 0);
    };
    s.id = "bool_sum l=" + std::to_string(l) + " threshold=" + std::to_string(threshold);
    return s;
}

SourceSpec noisy_bool_sum_source(int l, double flip, int threshold) {
    if (!(flip >= 0.0 && flip <= 0.5)) throw SpecError("flip probability must be in [0, 0.5]");
    SourceSpec s = bool_sum_source(l, threshold);
    auto base_rule = s.label_rule;
    s.label_rule = [base_rule, flip](std::span<const int> w) {
        Distribution d = base_rule(w);
        for (double& p : d.probs) p = p * (1.0 - flip) + (1.0 - p) * flip;
        return d;
    };
    s.id = "noisy_" + s.id + " flip=" + format_double(flip);
    return s;
}

SourceSpec bin2dec_source(int l) {
    if (l < 1 || l > 20) throw SpecError("bin2dec order must be in [1, 20]");
    SourceSpec s;
    s.order = l;
    s.input_vocab = Vocabulary(2);
    s.label_vocab = Vocabulary(1 << l);
    s.input_law = Distribution::uniform(2);
    const int n_labels = 1 << l;
    s.label_rule = [n_labels](std::span<const int> w) {
        int value = 0;
        for (int x : w) value = (value << 1) | x;
        return Distribution::point_mass(n_labels, value);
    };
    s.id = "bin2dec l=" + std::to_string(l);
    return s;
}

SourceSpec random_table_source(int l, std::uint64_t table_seed, int input_vocab_size,
                               int label_vocab_size) {
    if (l < 1) throw SpecError("random_table order must be >= 1");
    if (input_vocab_size < 2 || label_vocab_size < 2)
        throw SpecError("random_table vocabularies must have size >= 2");
    SourceSpec s;
    s.order = l;
    s.input_vocab = Vocabulary(input_vocab_size);
    s.label_vocab = Vocabulary(label_vocab_size);
    s.input_law = Distribution::uniform(input_vocab_size);
    const int n_labels = label_vocab_size;
    s.label_rule = [table_seed, n_labels](std::span<const int> w) {
        std::uint64_t h = fnv1a64(&table_seed, sizeof(table_seed));
        std::uint32_t len = static_cast<std::uint32_t>(w.size());
        h = fnv1a64(&len, sizeof(len), h);
        for (int x : w) {
            std::uint32_t v = static_cast<std::uint32_t>(x);
            h = fnv1a64(&v, sizeof(v), h);
        }
        std::mt19937_64 g(h);
        Distribution d;
        d.probs.resize(static_cast<std::size_t>(n_labels));
        double sum = 0.0;
        for (double& p : d.probs) {
            double u = 1.0 - uniform01(g);
            p = -std::log(std::max(u, 1e-300));
            sum += p;
        }
        for (double& p : d.probs) p /= sum;
        return d;
    };
    s.id = "random_table l=" + std::to_string(l) + " seed=" + std::to_string(table_seed) +
           " in=" + std::to_string(input_vocab_size) + " out=" + std::to_string(label_vocab_size);
    return s;
}

SourceSpec source_from_kv(const KvFile& kv) {
    const std::string name = kv.get_string("source");
    const int l = static_cast<int>(kv.get_int("l"));
    SourceSpec s;
    if (name == "bool_sum") {
        s = bool_sum_source(l, static_cast<int>(kv.get_int_or("threshold", -1)));
    } else if (name == "noisy_bool_sum") {
        s = noisy_bool_sum_source(l, kv.get_double("flip"),
                                  static_cast<int>(kv.get_int_or("threshold", -1)));
    } else if (name == "bin2dec") {
        s = bin2dec_source(l);
    } else if (name == "random_table") {
        s = random_table_source(l, static_cast<std::uint64_t>(kv.get_int("table_seed")),
                                static_cast<int>(kv.get_int_or("input_vocab", 2)),
                                static_cast<int>(kv.get_int_or("label_vocab", 2)));
    } else {
        throw SpecError("unknown source '" + name + "'");
    }
    s.validate();
    return s;
}

int sample_index(const Distribution& d, std::mt19937_64& g) {
    double u = uniform01(g);
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        acc += d.probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(d.size()) - 1;
}

LabeledDataset generate(const SourceSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw SpecError("dataset length must be >= 1");
    std::mt19937_64 input_rng(mix64(seed ^ kInputStream));
    std::mt19937_64 label_rng(mix64(seed ^ kLabelStream));

    LabeledDataset d;
    d.inputs.vocab = spec.input_vocab;
    d.labels.vocab = spec.label_vocab;
    d.markov_order_hint = spec.order;
    d.inputs.tokens.reserve(n);
    d.labels.tokens.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        d.inputs.tokens.push_back(sample_index(spec.input_law, input_rng));
    const auto l = static_cast<std::size_t>(spec.order);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t start = i + 1 >= l ? i + 1 - l : 0;
        std::span<const int> window(d.inputs.tokens.data() + start, i + 1 - start);
        d.labels.tokens.push_back(sample_index(spec.label_rule(window), label_rng));
    }
    return d;
}

void SuffixJoint::decode_suffix(long long id, std::span<int> out) const {
    for (std::size_t j = out.size(); j-- > 0;) {
        out[j] = static_cast<int>(id % input_vocab);
        id /= input_vocab;
    }
}

SuffixJoint suffix_conditional(const SourceSpec& spec, int k, long long budget) {
    spec.validate();
    if (k < 0) throw SpecError("window length must be >= 0");
    const int V = spec.input_vocab.size;
    const int L = std::max(k, spec.order);
    const long long n_windows = checked_pow(V, L, budget, "window enumeration");
    SuffixJoint sj;
    sj.k = k;
    sj.input_vocab = V;
    sj.label_count = spec.label_vocab.size;
    sj.suffix_count = checked_pow(V, k, budget, "suffix table");
    if (sj.suffix_count > (1LL << 26) / sj.label_count)
        throw CapacityError("joint suffix table of " + std::to_string(sj.suffix_count) + "x" +
                            std::to_string(sj.label_count) + " entries exceeds capacity");
    sj.joint.assign(static_cast<std::size_t>(sj.suffix_count * sj.label_count), 0.0);
    sj.suffix_prob.assign(static_cast<std::size_t>(sj.suffix_count), 0.0);

    std::vector<int> w(static_cast<std::size_t>(L), 0);
    std::span<const int> rule_window(w.data() + (L - spec.order),
                                     static_cast<std::size_t>(spec.order));
    for (long long id = 0; id < n_windows; ++id) {
        double prob = 1.0;
        for (int x : w) prob *= spec.input_law.probs[static_cast<std::size_t>(x)];
        if (prob > 0.0) {
            const long long suffix = id % sj.suffix_count;
            Distribution lab = spec.label_rule(rule_window);
            sj.suffix_prob[static_cast<std::size_t>(suffix)] += prob;
            double* row = sj.joint.data() + suffix * sj.label_count;
            for (int y = 0; y < sj.label_count; ++y)
                row[y] += prob * lab.probs[static_cast<std::size_t>(y)];
        }
        for (std::size_t j = w.size(); j-- > 0;) {
            if (++w[j] < V) break;
            w[j] = 0;
            if (j == 0) break;
        }
    }
    return sj;
}

double exact_conditional_entropy(const SourceSpec& spec, int k, LogBase base,
                                 long long budget) {
    SuffixJoint sj = suffix_conditional(spec, k, budget);
    double h = 0.0;
    for (long long s = 0; s < sj.suffix_count; ++s) {
        double ps = sj.suffix_prob[static_cast<std::size_t>(s)];
        if (ps <= 0.0) continue;
        const double* row = sj.joint.data() + s * sj.label_count;
        for (int y = 0; y < sj.label_count; ++y)
            if (row[y] > 0.0) h += row[y] * std::log(ps / row[y]);
    }
    return from_nats(std::max(h, 0.0), base);
}

double exact_grouped_entropy(const SourceSpec& spec, int k,
                             const std::function<long long(std::span<const int>)>& group,
                             LogBase base, long long budget) {
    SuffixJoint sj = suffix_conditional(spec, k, budget);
    std::unordered_map<long long, std::vector<double>> grouped;
    std::vector<int> w(static_cast<std::size_t>(k), 0);
    for (long long s = 0; s < sj.suffix_count; ++s) {
        if (sj.suffix_prob[static_cast<std::size_t>(s)] <= 0.0) continue;
        sj.decode_suffix(s, w);
        auto& row = grouped[group(w)];
        row.resize(static_cast<std::size_t>(sj.label_count), 0.0);
        const double* src = sj.joint.data() + s * sj.label_count;
        for (int y = 0; y < sj.label_count; ++y) row[static_cast<std::size_t>(y)] += src[y];
    }
    double h = 0.0;
    for (const auto& [gid, row] : grouped) {
        double pg = 0.0;
        for (double v : row) pg += v;
        if (pg <= 0.0) continue;
        for (double v : row)
            if (v > 0.0) h += v * std::log(pg / v);
    }
    return from_nats(std::max(h, 0.0), base);
}

double theorem1_limit(const SourceSpec& spec, int k, LogBase base, long long budget) {
    return exact_conditional_entropy(spec, std::min(spec.order, k), base, budget);
}

}  // namespace predlab
