#pragma once

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "predlab/markov.hpp"
#include "predlab/seq.hpp"

namespace predlab {

// The window at position i of a stream: (x_{max(0,i-span+1)}, ..., x_i).
inline std::span<const int> clipped_window(std::span<const int> stream, std::size_t i,
                                           int span) {
    std::size_t start = i + 1 >= static_cast<std::size_t>(span)
                            ? i + 1 - static_cast<std::size_t>(span)
                            : 0;
    return stream.subspan(start, i + 1 - start);
}

// Maps clipped windows of up to `span` past symbols to dense state ids in [0, state_count).
struct StateFunction {
    int span = 0;
    long long state_count = 1;
    std::function<long long(std::span<const int>)> map;
    std::string name;

    void validate() const;

    // every distinct window is its own state; short start-of-stream windows included
    static StateFunction identity(int span, int input_vocab);
    // state = sum of the window's symbols
    static StateFunction window_sum(int span, int input_vocab = 2);
    static StateFunction custom(int span, long long state_count,
                                std::function<long long(std::span<const int>)> map,
                                std::string name);
};

// Joint counts N(y; s) with marginals N(s); dense array below kDenseLimit cells,
// hash map above. The switch is invisible to callers.
class CountTable {
public:
    static constexpr long long kDenseLimit = 1LL << 26;

    CountTable() = default;
    CountTable(long long state_count, int label_count);

    void add(long long state, int label, long long c = 1);
    long long joint(long long state, int label) const;
    long long marginal(long long state) const;
    long long total() const { return total_; }
    long long state_count() const { return state_count_; }
    int label_count() const { return label_count_; }
    bool dense() const { return dense_storage_; }

    // every (state, label) with a nonzero count, in ascending key order
    std::vector<std::pair<long long, long long>> nonzero() const;

private:
    long long state_count_ = 1;
    int label_count_ = 2;
    long long total_ = 0;
    bool dense_storage_ = true;
    std::vector<long long> cells_;
    std::vector<long long> marginals_;
    std::unordered_map<long long, long long> sparse_;
    std::unordered_map<long long, long long> sparse_marginals_;

    void check(long long state, int label) const;
};

void save_count_table(const CountTable& t, int span, const std::string& path);
std::pair<CountTable, int> load_count_table(const std::string& path);

// Conditional label frequencies per state: p(y|s) = (N(y;s)+alpha) / (N(s)+alpha*|V|),
// falling back to a fixed distribution (uniform by default) for states with an
// empty denominator.
class BayesEstimator {
public:
    BayesEstimator(StateFunction fn, int label_count, double alpha = 0.0);

    static BayesEstimator fit(StateFunction fn, const LabeledDataset& d, double alpha = 0.0,
                              bool include_warmup = true);

    Distribution predict_state(long long state) const;
    Distribution predict(std::span<const int> window) const;
    double empirical_test_loss(const LabeledDataset& d_test, LogBase base) const;

    const StateFunction& state_fn() const { return fn_; }
    const CountTable& counts() const { return counts_; }
    CountTable& counts() { return counts_; }
    double alpha() const { return alpha_; }

    Distribution fallback;

private:
    StateFunction fn_;
    CountTable counts_;
    double alpha_ = 0.0;
};

// Expected test loss under the true source law, by exact enumeration of all
// stationary windows; no test-sampling noise.
double exact_expected_test_loss(const BayesEstimator& est, const SourceSpec& spec,
                                LogBase base, long long budget = kDefaultEnumBudget);

struct LossDecomposition {
    double entropy_term = 0.0;  // conditional label entropy given the estimator's state
    double kl_term = 0.0;       // expected divergence of the estimator from the true law
};

// Splits exact_expected_test_loss into its two addends; they sum back exactly.
LossDecomposition loss_decomposition(const BayesEstimator& est, const SourceSpec& spec,
                                     LogBase base, long long budget = kDefaultEnumBudget);

}  // namespace predlab
