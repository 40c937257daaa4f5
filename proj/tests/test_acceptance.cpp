// End-to-end acceptance checks, one printed line per criterion. Sweep sizes
// and tolerances are pinned here; the exit code is the number of failures.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "predlab/augment.hpp"
#include "predlab/fsmp.hpp"
#include "predlab/harness.hpp"
#include "predlab/limits.hpp"
#include "predlab/markov.hpp"
#include "predlab/transformer.hpp"

using namespace predlab;

namespace {

// criterion 1
constexpr double kFloorTolBits = 0.02;
constexpr double kFloorWallLimit = 60.0;
// criterion 2
constexpr double kRatioLo = 1.5;
constexpr double kRatioHi = 2.6;
// criterion 3
constexpr double kPlateauGapBits = 0.05;
constexpr double kCrossoverAlpha = 1.0;  // plain ratios explode on unseen labels
// criterion 4
constexpr double kSlackFloor = -1e-9;
// criterion 5
constexpr double kTaylorRelTol = 0.03;
constexpr double kCubicBound = 9.0;
// criterion 6; the step stays below any pre-activation's distance to a ReLU
// kink so the central difference never straddles one, yet is large enough to
// keep 64-bit roundoff noise orders below the tolerance
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-7;
constexpr double kGradWallLimit = 30.0;
// criterion 8
constexpr double kShiftGapTinyNats = 0.5;
constexpr double kShiftGapLargeNats = 0.05;

struct Clock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

struct Outcome {
    bool ok = false;
    std::string detail;
};

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

// mean exact expected loss of the fitted count estimator over stream seeds
double mean_exact_loss(const SourceSpec& src, int k, long long n, int seed_count,
                       double alpha) {
    std::vector<double> losses;
    for (int seed = 1; seed <= seed_count; ++seed) {
        LabeledDataset d = generate(src, static_cast<std::size_t>(n),
                                    static_cast<std::uint64_t>(seed));
        BayesEstimator est = BayesEstimator::fit(
            StateFunction::identity(k, src.input_vocab.size), d, alpha);
        losses.push_back(exact_expected_test_loss(est, src, LogBase::bits));
    }
    return mean(losses);
}

Outcome entropy_floor_convergence() {
    Clock clk;
    SourceSpec src = bool_sum_source(5);
    const double loss5 = mean_exact_loss(src, 5, 100000, 20, 0.0);
    const double loss3 = mean_exact_loss(src, 3, 100000, 20, 0.0);
    const double floor5 = theorem1_limit(src, 5, LogBase::bits);
    const double floor3 = exact_conditional_entropy(src, 3, LogBase::bits);
    const double wall = clk.seconds();
    const bool ok = std::abs(loss5 - floor5) <= kFloorTolBits &&
                    std::abs(loss3 - floor3) <= kFloorTolBits &&
                    wall < kFloorWallLimit;
    return {ok, "k=5 gap " + num(std::abs(loss5 - floor5)) + " bits, k=3 gap " +
                    num(std::abs(loss3 - floor3)) + " bits (tol " +
                    num(kFloorTolBits) + "), " + num(wall) + " s"};
}

Outcome state_count_error_rate() {
    SourceSpec src = noisy_bool_sum_source(5, 0.2);
    auto excess = [&](int k, long long n) {
        return mean_exact_loss(src, k, n, 20, 0.0) -
               theorem1_limit(src, k, LogBase::bits);
    };
    std::map<long long, double> ex6;
    for (long long n : {4096LL, 8192LL, 16384LL, 32768LL}) ex6[n] = excess(6, n);
    bool ok = true;
    std::string ratios;
    for (long long n : {4096LL, 8192LL, 16384LL}) {
        const double r = ex6[n] / ex6[2 * n];
        ok = ok && r >= kRatioLo && r <= kRatioHi;
        ratios += (ratios.empty() ? "" : "/") + num(r);
    }
    const double wide = excess(10, 4096);
    ok = ok && wide > ex6[4096];
    return {ok, "halving ratios " + ratios + " (want " + num(kRatioLo) + ".." +
                    num(kRatioHi) + "), k=10 excess " + num(wide) + " > k=6 " +
                    num(ex6[4096])};
}

Outcome window_length_crossover() {
    SourceSpec src = bool_sum_source(10);
    const double small_early = mean_exact_loss(src, 4, 1 << 7, 20, kCrossoverAlpha);
    const double large_early = mean_exact_loss(src, 12, 1 << 7, 20, kCrossoverAlpha);
    const double small_late = mean_exact_loss(src, 4, 1 << 18, 20, kCrossoverAlpha);
    const double mid_late = mean_exact_loss(src, 8, 1 << 18, 20, kCrossoverAlpha);
    const double large_late = mean_exact_loss(src, 12, 1 << 18, 20, kCrossoverAlpha);
    const double gap = small_late - large_late;
    const bool ok = gap > kPlateauGapBits && small_late > mid_late &&
                    small_early < large_early;
    return {ok, "plateau gap k4-k12 " + num(gap) + " bits (want > " +
                    num(kPlateauGapBits) + "), early losses k4 " + num(small_early) +
                    " < k12 " + num(large_early) + " (alpha=" +
                    num(kCrossoverAlpha) + ")"};
}

Outcome lower_bound_slack() {
    std::mt19937_64 g(0xacce57edULL);
    double min_slack = 1e300;
    for (int trial = 0; trial < 100; ++trial) {
        const int l = 1 + static_cast<int>(uniform_below(g, 5));
        SourceSpec src;
        switch (uniform_below(g, 4)) {
            case 0:
                src = bool_sum_source(l, static_cast<int>(uniform_below(g, l + 1)));
                break;
            case 1:
                src = noisy_bool_sum_source(l, 0.05 + 0.4 * uniform01(g));
                break;
            case 2:
                src = bin2dec_source(std::min(l, 4));
                break;
            default:
                src = random_table_source(l, g(), 2,
                                          2 + static_cast<int>(uniform_below(g, 3)));
        }
        const int k = static_cast<int>(uniform_below(g, 8));
        const std::uint64_t salt = g();
        const int labels = src.label_vocab.size;
        auto h = [salt, labels](std::span<const int> window) {
            std::uint64_t acc = salt;
            for (int x : window) acc = mix64(acc + static_cast<std::uint64_t>(x) + 1);
            Distribution d;
            double total = 0.0;
            for (int y = 0; y < labels; ++y) {
                acc = mix64(acc);
                const double w =
                    0.1 + static_cast<double>(acc >> 11) * 0x1.0p-53;
                d.probs.push_back(w);
                total += w;
            }
            for (double& p : d.probs) p /= total;
            return d;
        };
        Theorem2Result r = theorem2_check(h, src, k, LogBase::bits);
        min_slack = std::min(min_slack, r.slack);
    }
    return {min_slack >= kSlackFloor,
            "min slack " + num(min_slack) + " over 100 randomized predictors (floor " +
                num(kSlackFloor) + ")"};
}

Outcome divergence_expansion() {
    const double exact = kl_bernoulli({0.5, 0.01}, LogBase::nats);
    const double approx = kl_taylor({0.5, 0.01}, LogBase::nats);
    const double rel = std::abs(exact - approx) / exact;
    bool ok = rel < kTaylorRelTol;
    double worst = 0.0;
    for (double p : {0.2, 0.35, 0.5, 0.65, 0.8}) {
        for (double t : {1e-2, 1e-3, 1e-4}) {
            if (t > 0.1 * std::min(p, 1.0 - p)) continue;
            const double gap = std::abs(kl_bernoulli({p, t}, LogBase::nats) -
                                        kl_taylor({p, t}, LogBase::nats));
            worst = std::max(worst, gap / (t * t * t));
        }
    }
    ok = ok && worst <= kCubicBound;
    return {ok, "rel err " + num(rel) + " at p=0.5 t=0.01 (tol " + num(kTaylorRelTol) +
                    "), cubic coeff " + num(worst) + " <= " + num(kCubicBound)};
}

Outcome gradient_correctness() {
    Clock clk;
    ModelConfig cfg;
    cfg.input_vocab = 2;
    cfg.label_vocab = 2;
    cfg.d_in = 8;
    cfg.d_model = 8;
    cfg.ffn_hidden = 8;
    cfg.heads = 2;
    cfg.span = 3;
    cfg.layers = 1;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 g(mix64(seed));
        std::vector<int> tokens(10), labels(10);
        for (int& x : tokens) x = static_cast<int>(uniform_below(g, 2));
        for (int& y : labels) y = static_cast<int>(uniform_below(g, 2));
        TransformerParams params = TransformerParams::init(cfg, 100 + seed);

        Tape tape;
        ParamNodes nodes = leaf_params(tape, params);
        tape.backward(
            tape.softmax_xent_mean(window_logits(tape, nodes, cfg, tokens), labels));
        const std::vector<int> ids = nodes.in_tensor_order(cfg);

        auto loss_now = [&] {
            Tape t;
            ParamNodes n = leaf_params(t, params);
            return t.val(t.softmax_xent_mean(window_logits(t, n, cfg, tokens), labels))
                .at(0, 0);
        };
        auto named = params.named_tensors();
        const double h = kGradStep;
        for (std::size_t t = 0; t < named.size(); ++t) {
            Matrix* tensor = named[t].second;
            const Matrix& analytic = tape.grad(ids[t]);
            for (std::size_t i = 0; i < tensor->a.size(); ++i) {
                const double keep = tensor->a[i];
                tensor->a[i] = keep + h;
                const double up = loss_now();
                tensor->a[i] = keep - h;
                const double dn = loss_now();
                tensor->a[i] = keep;
                const double fd = (up - dn) / (2.0 * h);
                const double an = analytic.a[i];
                worst = std::max(worst, std::abs(an - fd) /
                                            std::max({1.0, std::abs(an), std::abs(fd)}));
            }
        }
    }
    const double wall = clk.seconds();
    return {worst < kGradRelTol && wall < kGradWallLimit,
            "max rel err " + num(worst) + " over 5 seeds (tol " + num(kGradRelTol) +
                "), " + num(wall) + " s"};
}

ExperimentSpec transformer_spec(SourceSpec src) {
    ExperimentSpec spec;
    spec.source = std::move(src);
    spec.predictor = "transformer";
    spec.evaluation = "empirical";
    spec.model.d_in = 16;
    spec.model.d_model = 16;
    spec.model.ffn_hidden = 32;
    spec.model.heads = 2;
    spec.train_opts.steps = 400;
    spec.train_opts.n_pos = 32;
    spec.train_opts.batch_size = 8;
    spec.train_opts.lr = 3e-3;
    return spec;
}

// test loss per seed for one trained setting
std::vector<double> trained_losses(const ExperimentSpec& spec, int k, long long n,
                                   const std::string& mode, int t0, bool* clean) {
    std::vector<double> out;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ResultRecord r = run_point(spec, {k, n, seed, mode, 1, t0});
        if (r.status != "ok") *clean = false;
        out.push_back(r.test_loss_nats);
    }
    return out;
}

int count_less(const std::vector<double>& a, const std::vector<double>& b) {
    int c = 0;
    for (std::size_t i = 0; i < a.size(); ++i) c += a[i] < b[i] ? 1 : 0;
    return c;
}

Outcome mixing_mode_ordering() {
    bool clean = true;
    ExperimentSpec spec = transformer_spec(bool_sum_source(5));
    std::map<std::pair<std::string, int>, std::vector<double>> loss;
    for (const char* mode : {"attention", "aggregation"})
        for (int k : {5, 10, 15})
            loss[{mode, k}] = trained_losses(spec, k, 4096, mode, -1, &clean);

    // ordering holds per seed; a majority of seeds must agree
    int grow_attn = std::min(count_less(loss[{"attention", 5}], loss[{"attention", 10}]),
                             count_less(loss[{"attention", 10}], loss[{"attention", 15}]));
    int grow_aggr =
        std::min(count_less(loss[{"aggregation", 5}], loss[{"aggregation", 10}]),
                 count_less(loss[{"aggregation", 10}], loss[{"aggregation", 15}]));
    int attn_wins_wide = count_less(loss[{"attention", 15}], loss[{"aggregation", 15}]);

    ExperimentSpec numeral = transformer_spec(bin2dec_source(5));
    std::vector<double> num_attn = trained_losses(numeral, 5, 4096, "attention", -1, &clean);
    std::vector<double> num_aggr =
        trained_losses(numeral, 5, 4096, "aggregation", -1, &clean);
    // "at least as well": averaging must not lose on a majority of seeds
    int aggr_holds = 5 - count_less(num_attn, num_aggr);

    const bool ok = clean && grow_attn >= 3 && grow_aggr >= 3 && attn_wins_wide >= 3 &&
                    aggr_holds >= 3;
    return {ok, "loss grows with k on " + std::to_string(grow_attn) + "/5 (attention) and " +
                    std::to_string(grow_aggr) + "/5 (averaging) seeds; attention wins at k=15 on " +
                    std::to_string(attn_wins_wide) + "/5; averaging holds on the numeral task on " +
                    std::to_string(aggr_holds) + "/5 (mean " + num(mean(num_aggr)) +
                    " vs " + num(mean(num_attn)) + " nats)"};
}

Outcome shift_augmentation_effect() {
    bool clean = true;
    ExperimentSpec spec = transformer_spec(bool_sum_source(5));
    const double tiny_all = mean(trained_losses(spec, 5, 64, "attention", 0, &clean));
    const double tiny_none = mean(trained_losses(spec, 5, 64, "attention", 31, &clean));
    const double big_all = mean(trained_losses(spec, 5, 32000, "attention", 0, &clean));
    const double big_none = mean(trained_losses(spec, 5, 32000, "attention", 31, &clean));
    const double tiny_gap = std::abs(tiny_all - tiny_none);
    const double big_gap = std::abs(big_all - big_none);

    // power-of-two cases make the closed form exactly representable, so the
    // comparison is bitwise no matter how the library orders its operations
    const AugmentSpec last_only{31, 32};
    const AugmentSpec last_four{28, 32};
    const AugmentSpec every_shift{0, 100};
    const double general = prop1_gain(100, every_shift);
    const double general_want = (1.0 - 1.0 / 100) / 100;
    const bool formula_ok =
        prop1_gain(512, last_only) == 0.0 &&
        prop1_gain(128, last_four) == 0.75 * (1.0 / 128) &&
        prop1_gain(200, every_shift) == 0.5 * general &&
        std::abs(general - general_want) <= 4e-16 * general_want;

    const bool ok = clean && tiny_gap > kShiftGapTinyNats &&
                    big_gap < kShiftGapLargeNats && formula_ok;
    return {ok, "shift-extreme gap " + num(tiny_gap) + " nats at n=64 (want > " +
                    num(kShiftGapTinyNats) + "), " + num(big_gap) +
                    " at n=32000 (want < " + num(kShiftGapLargeNats) +
                    "); gain formula exact: " + (formula_ok ? "yes" : "no")};
}

// brute-force conditional frequencies agree with fit/predict, bit for bit
bool dataset_matches_oracle(const std::vector<int>& xs, const std::vector<int>& ys,
                            int k) {
    LabeledDataset d;
    d.inputs.vocab = Vocabulary(2);
    d.labels.vocab = Vocabulary(2);
    d.inputs.tokens = xs;
    d.labels.tokens = ys;
    BayesEstimator est = BayesEstimator::fit(StateFunction::identity(k, 2), d, 0.0);

    // joint/marginal counts per clipped window, keyed by (length, bits)
    std::array<std::array<long long, 2>, 1 << 5> joint{};
    std::array<long long, 1 << 5> marg{};
    auto key = [&](std::size_t i) {
        const std::size_t len = std::min<std::size_t>(i + 1, static_cast<std::size_t>(k));
        std::size_t bits = 0;
        for (std::size_t j = i + 1 - len; j <= i; ++j)
            bits = bits * 2 + static_cast<std::size_t>(xs[j]);
        return (std::size_t{1} << len) - 1 + bits;  // levels packed contiguously
    };
    for (std::size_t i = 0; i < xs.size(); ++i) {
        ++joint[key(i)][static_cast<std::size_t>(ys[i])];
        ++marg[key(i)];
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::size_t len = std::min<std::size_t>(i + 1, static_cast<std::size_t>(k));
        Distribution got =
            est.predict(std::span<const int>(xs).subspan(i + 1 - len, len));
        const std::size_t s = key(i);
        for (int y = 0; y < 2; ++y) {
            const double want = static_cast<double>(joint[s][static_cast<std::size_t>(y)]) /
                                static_cast<double>(marg[s]);
            if (got.probs[static_cast<std::size_t>(y)] != want) return false;
        }
    }
    return true;
}

Outcome counting_oracle_equivalence() {
    long long checked = 0;
    for (int n = 1; n <= 10; ++n) {
        std::vector<int> xs(static_cast<std::size_t>(n)), ys(static_cast<std::size_t>(n));
        for (long long xbits = 0; xbits < (1LL << n); ++xbits) {
            for (int i = 0; i < n; ++i) xs[static_cast<std::size_t>(i)] = (xbits >> i) & 1;
            for (long long ybits = 0; ybits < (1LL << n); ++ybits) {
                for (int i = 0; i < n; ++i)
                    ys[static_cast<std::size_t>(i)] = (ybits >> i) & 1;
                for (int k = 0; k <= 3; ++k) {
                    if (!dataset_matches_oracle(xs, ys, k))
                        return {false, "mismatch at n=" + std::to_string(n) +
                                           " x=" + std::to_string(xbits) +
                                           " y=" + std::to_string(ybits) +
                                           " k=" + std::to_string(k)};
                    ++checked;
                }
            }
        }
    }
    std::mt19937_64 g(0x0c0ffeeULL);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 11 + uniform_below(g, 10);
        std::vector<int> xs(n), ys(n);
        for (int& x : xs) x = static_cast<int>(uniform_below(g, 2));
        for (int& y : ys) y = static_cast<int>(uniform_below(g, 2));
        for (int k = 0; k <= 3; ++k) {
            if (!dataset_matches_oracle(xs, ys, k))
                return {false, "mismatch on random dataset " + std::to_string(trial) +
                                   " (n=" + std::to_string(n) + ", k=" +
                                   std::to_string(k) + ")"};
            ++checked;
        }
    }
    return {true, "exact agreement on " + std::to_string(checked) +
                      " dataset/window-length pairs (exhaustive n<=10 + 1000 random n in 11..20)"};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Outcome (*run)();
    };
    const Criterion criteria[] = {
        {"entropy-floor convergence", entropy_floor_convergence},
        {"state-count error rate", state_count_error_rate},
        {"window-length crossover", window_length_crossover},
        {"lower-bound slack", lower_bound_slack},
        {"divergence expansion", divergence_expansion},
        {"gradient correctness", gradient_correctness},
        {"mixing-mode ordering", mixing_mode_ordering},
        {"shift-augmentation effect", shift_augmentation_effect},
        {"counting-oracle equivalence", counting_oracle_equivalence},
    };
    int failures = 0;
    int id = 0;
    for (const Criterion& c : criteria) {
        ++id;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.ok ? 0 : 1;
        std::printf("[%s] %d %-28s %s\n", o.ok ? "PASS" : "FAIL", id, c.name,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}
