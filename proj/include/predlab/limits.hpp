#pragma once

#include <functional>
#include <span>

#include "predlab/markov.hpp"

namespace predlab {

// A Bernoulli(p) reference and a perturbed Bernoulli(p + t), both strictly inside (0, 1).
struct BernoulliPair {
    double p = 0.5;
    double t = 0.0;
    void validate() const;
};

double kl_bernoulli(const BernoulliPair& pair, LogBase base);

// Second-order expansion (t^2/2)(1/p + 1/(1-p)) in nats. Only honored in the
// small-perturbation regime |t| <= 0.1 * min(p, 1-p).
double kl_taylor(const BernoulliPair& pair, LogBase base);

struct Theorem2Result {
    double loss = 0.0;   // exact expected cross-entropy of the predictor
    double bound = 0.0;  // conditional entropy floor at window length min(l, k)
    double slack = 0.0;  // loss - bound, always >= 0 up to rounding
};

// Evaluates an arbitrary span-k predictor against the entropy lower bound.
// Throws if the measured slack dips below -1e-9.
Theorem2Result theorem2_check(const std::function<Distribution(std::span<const int>)>& h,
                              const SourceSpec& spec, int k, LogBase base,
                              long long budget = kDefaultEnumBudget);

}  // namespace predlab
