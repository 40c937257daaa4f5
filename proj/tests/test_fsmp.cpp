#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "predlab/fsmp.hpp"

using namespace predlab;

namespace {

LabeledDataset binary_dataset(const std::vector<int>& xs, const std::vector<int>& ys) {
    LabeledDataset d;
    d.inputs.vocab = Vocabulary(2);
    d.labels.vocab = Vocabulary(2);
    d.inputs.tokens = xs;
    d.labels.tokens = ys;
    return d;
}

}  // namespace

TEST_CASE("identity states are distinct and dense across window lengths") {
    StateFunction f = StateFunction::identity(3, 2);
    CHECK(f.state_count == 2 + 4 + 8);
    std::set<long long> seen;
    for (int len = 1; len <= 3; ++len) {
        for (int value = 0; value < (1 << len); ++value) {
            std::vector<int> w;
            for (int b = len - 1; b >= 0; --b) w.push_back((value >> b) & 1);
            long long id = f.map(w);
            CHECK(id >= 0);
            CHECK(id < f.state_count);
            CHECK(seen.insert(id).second);
        }
    }
    CHECK(seen.size() == static_cast<std::size_t>(f.state_count));

    StateFunction f0 = StateFunction::identity(0, 2);
    CHECK(f0.state_count == 1);
    CHECK(f0.map(std::span<const int>{}) == 0);
}

TEST_CASE("window-sum states count symbol totals") {
    StateFunction f = StateFunction::window_sum(4);
    CHECK(f.state_count == 5);
    std::vector<int> w = {1, 0, 1, 1};
    CHECK(f.map(w) == 3);
    CHECK(f.map(std::span<const int>(w.data(), 2)) == 1);
    StateFunction t = StateFunction::window_sum(2, 4);
    CHECK(t.state_count == 7);
}

TEST_CASE("order-zero fit reduces to global label frequencies") {
    auto d = binary_dataset({0, 1, 0, 1}, {1, 1, 0, 1});
    auto est = BayesEstimator::fit(StateFunction::identity(0, 2), d);
    Distribution p = est.predict(std::span<const int>{});
    CHECK(p.probs[1] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(p.probs[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("first-order fit reproduces hand counts") {
    auto d = binary_dataset({0, 1, 1, 0, 1}, {1, 1, 0, 1, 1});
    auto est = BayesEstimator::fit(StateFunction::identity(1, 2), d);
    int x0 = 0, x1 = 1;
    CHECK(est.predict(std::span<const int>(&x0, 1)).probs[1] == 1.0);
    CHECK(est.predict(std::span<const int>(&x1, 1)).probs[1] ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("additive smoothing and the unseen-state fallback") {
    StateFunction f = StateFunction::identity(1, 2);
    auto d = binary_dataset({0}, {1});
    auto smoothed = BayesEstimator::fit(f, d, 1.0);
    int x0 = 0;
    Distribution p = smoothed.predict(std::span<const int>(&x0, 1));
    CHECK(p.probs[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(p.probs[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    BayesEstimator empty(StateFunction::identity(2, 2), 2);
    int w[2] = {1, 1};
    Distribution q = empty.predict(std::span<const int>(w, 2));
    CHECK(q.probs[0] == 0.5);
    CHECK(q.probs[1] == 0.5);

    // a state with counts still answers its frequencies under alpha = 0
    int x1 = 1;
    auto fitted = BayesEstimator::fit(f, binary_dataset({1, 1}, {0, 1}));
    Distribution r = fitted.predict(std::span<const int>(&x1, 1));
    CHECK(r.probs[0] == 0.5);
    CHECK(r.probs[1] == 0.5);
}

TEST_CASE("windows longer than the span are rejected") {
    BayesEstimator est(StateFunction::identity(1, 2), 2);
    int w[2] = {0, 1};
    CHECK_THROWS_AS(est.predict(std::span<const int>(w, 2)), SpecError);
}

TEST_CASE("empirical test loss matches hand arithmetic") {
    auto est = BayesEstimator::fit(StateFunction::identity(1, 2),
                                   binary_dataset({0, 1, 1, 0, 1}, {1, 1, 0, 1, 1}));
    auto test = binary_dataset({0, 1}, {1, 0});
    // predictions: p(1|x=0) = 1 and p(0|x=1) = 1/3
    const double oracle = (0.0 + std::log(3.0)) / 2.0;
    CHECK(est.empirical_test_loss(test, LogBase::nats) ==
          doctest::Approx(oracle).epsilon(1e-12));

    BayesEstimator unfitted(StateFunction::identity(1, 2), 2);
    CHECK(unfitted.empirical_test_loss(test, LogBase::bits) ==
          doctest::Approx(1.0).epsilon(1e-12));

    auto matching = BayesEstimator::fit(StateFunction::identity(1, 2),
                                        binary_dataset({0, 1}, {1, 0}));
    CHECK(matching.empirical_test_loss(binary_dataset({0, 1, 0}, {1, 0, 1}),
                                       LogBase::nats) == 0.0);

    CHECK_THROWS_AS(est.empirical_test_loss(binary_dataset({}, {}), LogBase::nats),
                    SpecError);
}

TEST_CASE("warm-up positions can be excluded from counting") {
    auto d = binary_dataset({1, 1, 0}, {1, 0, 1});
    auto with = BayesEstimator::fit(StateFunction::identity(2, 2), d, 0.0, true);
    auto without = BayesEstimator::fit(StateFunction::identity(2, 2), d, 0.0, false);
    CHECK(with.counts().total() == 3);
    CHECK(without.counts().total() == 2);  // position 0 has a length-1 window
}

TEST_CASE("fit and predict agree with brute-force conditional frequencies") {
    // every binary dataset of length up to 6, every span up to 2
    for (int n = 1; n <= 6; ++n) {
        for (long long code = 0; code < (1LL << (2 * n)); ++code) {
            std::vector<int> xs, ys;
            for (int i = 0; i < n; ++i) {
                xs.push_back(static_cast<int>((code >> i) & 1));
                ys.push_back(static_cast<int>((code >> (n + i)) & 1));
            }
            auto d = binary_dataset(xs, ys);
            for (int k = 0; k <= 2; ++k) {
                auto est = BayesEstimator::fit(StateFunction::identity(k, 2), d);
                for (int i = 0; i < n; ++i) {
                    int start = std::max(0, i - k + 1);
                    std::vector<int> wi(xs.begin() + start, xs.begin() + i + 1);
                    long match = 0, ones = 0;
                    for (int j = 0; j < n; ++j) {
                        int js = std::max(0, j - k + 1);
                        std::vector<int> wj(xs.begin() + js, xs.begin() + j + 1);
                        if (wj == wi) {
                            ++match;
                            ones += ys[static_cast<std::size_t>(j)];
                        }
                    }
                    Distribution p = est.predict(wi);
                    CHECK(p.probs[1] == static_cast<double>(ones) / match);
                    CHECK(p.probs[0] == static_cast<double>(match - ones) / match);
                }
            }
        }
    }
}

TEST_CASE("exact expected loss evaluates the estimator under the true law") {
    SourceSpec det = bool_sum_source(3);
    // once every window is seen, a deterministic source is predicted perfectly
    auto est = BayesEstimator::fit(StateFunction::identity(3, 2), generate(det, 2000, 1));
    CHECK(exact_expected_test_loss(est, det, LogBase::bits) == 0.0);

    BayesEstimator uniform(StateFunction::identity(3, 2), 2);
    CHECK(exact_expected_test_loss(uniform, det, LogBase::bits) ==
          doctest::Approx(1.0).epsilon(1e-12));

    SourceSpec s21 = bool_sum_source(2, 1);
    auto big = BayesEstimator::fit(StateFunction::identity(1, 2), generate(s21, 100'000, 5));
    double loss = exact_expected_test_loss(big, s21, LogBase::bits);
    CHECK(std::abs(loss - 0.5) < 0.01);
    CHECK(loss >= 0.5 - 1e-12);
}

TEST_CASE("empirical loss converges to the exact expectation") {
    SourceSpec s = noisy_bool_sum_source(3, 0.2);
    auto est = BayesEstimator::fit(StateFunction::identity(3, 2), generate(s, 4096, 2));
    double exact = exact_expected_test_loss(est, s, LogBase::nats);
    double emp = est.empirical_test_loss(generate(s, 300'000, 77), LogBase::nats);
    CHECK(std::abs(emp - exact) < 0.012);
}

TEST_CASE("loss splits into entropy plus divergence") {
    SourceSpec det = bool_sum_source(3);
    BayesEstimator uniform(StateFunction::identity(3, 2), 2);
    auto [h_u, kl_u] = loss_decomposition(uniform, det, LogBase::bits);
    CHECK(h_u == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(kl_u == doctest::Approx(1.0).epsilon(1e-12));

    auto covered = BayesEstimator::fit(StateFunction::identity(3, 2), generate(det, 2000, 1));
    auto [h_c, kl_c] = loss_decomposition(covered, det, LogBase::bits);
    CHECK(h_c == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(kl_c == doctest::Approx(0.0).epsilon(1e-12));

    // the two terms always reassemble the exact loss, and the divergence never goes negative
    std::vector<SourceSpec> specs = {noisy_bool_sum_source(3, 0.25), bin2dec_source(2),
                                     random_table_source(2, 9, 2, 3)};
    int fit_n = 64;
    for (const auto& s : specs) {
        for (std::uint64_t seed = 1; seed <= 4; ++seed) {
            for (int k = 0; k <= s.order + 1; ++k) {
                auto est = BayesEstimator::fit(StateFunction::identity(k, 2),
                                               generate(s, fit_n, seed));
                auto [h, kl] = loss_decomposition(est, s, LogBase::nats);
                double total = exact_expected_test_loss(est, s, LogBase::nats);
                CHECK(h + kl == doctest::Approx(total).epsilon(1e-9));
                CHECK(kl >= -1e-9);
            }
        }
    }
}

TEST_CASE("identity estimators exceed the loss floor by exactly their divergence") {
    SourceSpec s = noisy_bool_sum_source(3, 0.2);
    double limit = theorem1_limit(s, 3, LogBase::nats);
    for (std::uint64_t seed : {1, 2, 3}) {
        auto est = BayesEstimator::fit(StateFunction::identity(3, 2), generate(s, 512, seed));
        auto [h, kl] = loss_decomposition(est, s, LogBase::nats);
        double total = exact_expected_test_loss(est, s, LogBase::nats);
        CHECK(h == doctest::Approx(limit).epsilon(1e-9));
        CHECK(total - limit == doctest::Approx(kl).epsilon(1e-9));
        CHECK(kl >= 0.0);
    }
}

TEST_CASE("a sufficient coarse state function reaches the same floor with fewer states") {
    SourceSpec s = noisy_bool_sum_source(4, 0.15);
    auto d = generate(s, 50'000, 11);
    auto id_est = BayesEstimator::fit(StateFunction::identity(4, 2), d);
    auto sum_est = BayesEstimator::fit(StateFunction::window_sum(4), d);
    double id_loss = exact_expected_test_loss(id_est, s, LogBase::nats);
    double sum_loss = exact_expected_test_loss(sum_est, s, LogBase::nats);
    double limit = theorem1_limit(s, 4, LogBase::nats);
    CHECK(id_loss >= limit - 1e-12);
    CHECK(sum_loss >= limit - 1e-12);
    // the sum state is sufficient for this source, so both lie near the floor
    CHECK(std::abs(sum_loss - limit) < 0.01);
    CHECK(std::abs(id_loss - limit) < 0.01);
}

TEST_CASE("mean excess shrinks as the train stream grows") {
    SourceSpec s = noisy_bool_sum_source(3, 0.2);
    double limit = theorem1_limit(s, 4, LogBase::nats);
    auto mean_excess = [&](std::size_t n) {
        double acc = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto est = BayesEstimator::fit(StateFunction::identity(4, 2), generate(s, n, seed));
            acc += exact_expected_test_loss(est, s, LogBase::nats) - limit;
        }
        return acc / 5.0;
    };
    double small = mean_excess(2048), large = mean_excess(8192);
    CHECK(small > 0.0);
    CHECK(large > 0.0);
    CHECK(large < small);
}

TEST_CASE("count tables switch to sparse storage above the dense budget") {
    CountTable dense(1000, 2);
    CHECK(dense.dense());
    CountTable sparse(1LL << 40, 2);
    CHECK_FALSE(sparse.dense());
    sparse.add(123456789012LL, 1, 3);
    sparse.add(123456789012LL, 0, 1);
    sparse.add(7, 1);
    CHECK(sparse.joint(123456789012LL, 1) == 3);
    CHECK(sparse.marginal(123456789012LL) == 4);
    CHECK(sparse.marginal(99) == 0);
    CHECK(sparse.total() == 5);

    CHECK_THROWS_AS(dense.add(-1, 0), SpecError);
    CHECK_THROWS_AS(dense.add(0, 5), SpecError);
}

TEST_CASE("count table marginals stay consistent with joints") {
    SourceSpec s = noisy_bool_sum_source(3, 0.3);
    auto est = BayesEstimator::fit(StateFunction::identity(3, 2), generate(s, 5000, 4));
    const CountTable& t = est.counts();
    long long n = 0;
    for (long long st = 0; st < t.state_count(); ++st) {
        long long row = 0;
        for (int y = 0; y < t.label_count(); ++y) row += t.joint(st, y);
        CHECK(row == t.marginal(st));
        n += row;
    }
    CHECK(n == t.total());
    CHECK(t.total() == 5000);
}

TEST_CASE("count tables round trip through their binary format") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "predlab_fsmp_io";
    fs::create_directories(dir);

    SourceSpec s = noisy_bool_sum_source(2, 0.25);
    auto est = BayesEstimator::fit(StateFunction::identity(2, 2), generate(s, 800, 3));
    std::string path = (dir / "counts.bin").string();
    save_count_table(est.counts(), 2, path);
    auto [loaded, span] = load_count_table(path);
    CHECK(span == 2);
    CHECK(loaded.state_count() == est.counts().state_count());
    CHECK(loaded.label_count() == est.counts().label_count());
    CHECK(loaded.total() == est.counts().total());
    CHECK(loaded.nonzero() == est.counts().nonzero());

    CountTable sparse(1LL << 30, 3);
    sparse.add(5, 2, 7);
    sparse.add((1LL << 29), 0, 2);
    std::string sparse_path = (dir / "sparse.bin").string();
    save_count_table(sparse, 9, sparse_path);
    auto [sparse_back, sparse_span] = load_count_table(sparse_path);
    CHECK(sparse_span == 9);
    CHECK_FALSE(sparse_back.dense());
    CHECK(sparse_back.nonzero() == sparse.nonzero());

    std::string junk = (dir / "junk.bin").string();
    {
        std::ofstream out(junk, std::ios::binary);
        out << "not a table";
    }
    CHECK_THROWS_AS(load_count_table(junk), SpecError);
    fs::remove_all(dir);
}
