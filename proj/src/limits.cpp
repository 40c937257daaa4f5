#include "predlab/limits.hpp"

#include <cmath>

namespace predlab {

void BernoulliPair::validate() const {
    if (!(p > 0.0 && p < 1.0))
        throw SpecError("p = " + std::to_string(p) + " must lie strictly inside (0, 1)");
    if (!(p + t > 0.0 && p + t < 1.0))
        throw SpecError("p + t = " + std::to_string(p + t) + " must lie strictly inside (0, 1)");
}

double kl_bernoulli(const BernoulliPair& pair, LogBase base) {
    pair.validate();
    const double p = pair.p, q = pair.p + pair.t;
    double nats = p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    return from_nats(std::max(nats, 0.0), base);
}

double kl_taylor(const BernoulliPair& pair, LogBase base) {
    pair.validate();
    const double p = pair.p, t = pair.t;
    if (std::abs(t) > 0.1 * std::min(p, 1.0 - p))
        throw SpecError("perturbation t = " + std::to_string(t) +
                        " too large for the second-order approximation at p = " +
                        std::to_string(p));
    double nats = 0.5 * t * t * (1.0 / p + 1.0 / (1.0 - p));
    return from_nats(nats, base);
}

Theorem2Result theorem2_check(const std::function<Distribution(std::span<const int>)>& h,
                              const SourceSpec& spec, int k, LogBase base,
                              long long budget) {
    if (!h) throw SpecError("null predictor");
    SuffixJoint sj = suffix_conditional(spec, k, budget);
    std::vector<int> w(static_cast<std::size_t>(sj.k));
    double loss = 0.0;
    for (long long s = 0; s < sj.suffix_count; ++s) {
        if (sj.suffix_prob[static_cast<std::size_t>(s)] <= 0.0) continue;
        sj.decode_suffix(s, w);
        Distribution q = h(w);
        if (q.size() != static_cast<std::size_t>(spec.label_vocab.size))
            throw SpecError("predictor output size does not match the label vocabulary");
        q.validate();
        const double* row = sj.joint.data() + s * sj.label_count;
        for (int y = 0; y < sj.label_count; ++y)
            if (row[y] > 0.0) loss += row[y] * log_loss(q, y, LogBase::nats);
    }
    Theorem2Result r;
    r.loss = from_nats(loss, base);
    r.bound = theorem1_limit(spec, k, base, budget);
    r.slack = r.loss - r.bound;
    if (r.slack < -1e-9)
        throw NumericalError("predictor loss fell below the entropy bound by " +
                             std::to_string(-r.slack));
    return r;
}

}  // namespace predlab
