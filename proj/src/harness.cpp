#include "predlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "predlab/augment.hpp"
#include "predlab/csv.hpp"

namespace predlab {

namespace {

// held-out streams are shared across seeds so curves differ only in training
constexpr std::uint64_t kTestStreamSeed = 0x7e57da7a00005eedULL;

bool is_transformer(const ExperimentSpec& s) { return s.predictor == "transformer"; }

std::string fmt(double v) { return format_double(v); }

}  // namespace

void ExperimentSpec::validate() const {
    if (predictor != "fsmp" && predictor != "transformer")
        throw SpecError("predictor must be fsmp or transformer");
    if (evaluation != "exact" && evaluation != "empirical")
        throw SpecError("evaluation must be exact or empirical");
    const bool synthetic = source.has_value();
    if (synthetic == !corpus_path.empty())
        throw SpecError("give exactly one of a synthetic source and a corpus");
    if (evaluation == "exact" && (!synthetic || predictor != "fsmp"))
        throw SpecError("exact evaluation works only for fsmp on a synthetic source");
    if (ks.empty() || ns.empty() || seeds.empty()) throw SpecError("empty sweep grid");
    for (int k : ks) {
        if (k < 0) throw SpecError("negative context length");
        if (is_transformer(*this) && k < 1)
            throw SpecError("transformer span must be >= 1");
    }
    for (long long n : ns)
        if (n < 1) throw SpecError("stream lengths must be >= 1");
    if (alpha < 0.0) throw SpecError("smoothing must be >= 0");
    if (test_n < 1) throw SpecError("test stream must be nonempty");
    if (vocab_cap < 1) throw SpecError("vocabulary cap must be >= 1");
    if (is_transformer(*this)) {
        if (modes.empty() || ffn_flags.empty() || t0s.empty())
            throw SpecError("empty transformer grid axis");
        for (const std::string& m : modes) attn_mode_from_string(m);
        for (int f : ffn_flags)
            if (f != 0 && f != 1) throw SpecError("use_ffn entries must be 0 or 1");
        for (int t0 : t0s)
            if (t0 < -1 || t0 >= train_opts.n_pos)
                throw SpecError("augment shift outside [-1, n_pos - 1]");
    }
    if (out_csv.empty()) throw SpecError("missing output path");
}

ExperimentSpec ExperimentSpec::from_kv(const KvFile& kv) {
    kv.require_keys({"predictor", "k", "n"},
                    {"source", "l", "threshold", "flip", "table_seed", "input_vocab",
                     "label_vocab", "corpus", "tokenizer", "vocab_cap", "evaluation",
                     "seeds", "alpha", "test_n", "budget", "mode", "use_ffn", "t0",
                     "d_in", "d_model", "ffn_hidden", "heads", "layers", "residual",
                     "positional", "steps", "n_pos", "batch_size", "lr", "out"});
    ExperimentSpec s;
    s.predictor = kv.get_string("predictor");
    if (kv.has("source") && kv.has("corpus"))
        throw SpecError("give exactly one of a synthetic source and a corpus");
    if (kv.has("source")) s.source = source_from_kv(kv);
    if (kv.has("corpus")) s.corpus_path = kv.get_string("corpus");
    s.tokenizer = tokenizer_from_string(kv.get_string_or("tokenizer", "char"));
    s.vocab_cap = static_cast<int>(kv.get_int_or("vocab_cap", 256));
    const bool synthetic_fsmp = s.source.has_value() && s.predictor == "fsmp";
    s.evaluation = kv.get_string_or("evaluation", synthetic_fsmp ? "exact" : "empirical");

    for (long long k : kv.get_int_list("k")) s.ks.push_back(static_cast<int>(k));
    s.ns = kv.get_int_list("n");
    if (kv.has("seeds"))
        for (long long v : kv.get_int_list("seeds")) {
            if (v < 0) throw SpecError("seeds must be >= 0");
            s.seeds.push_back(static_cast<std::uint64_t>(v));
        }
    else
        s.seeds = {1};

    s.alpha = kv.get_double_or("alpha", 0.0);
    s.test_n = static_cast<std::size_t>(kv.get_int_or("test_n", 1LL << 14));
    s.enum_budget = kv.get_int_or("budget", kDefaultEnumBudget);

    s.modes = kv.has("mode") ? kv.get_string_list("mode")
                             : std::vector<std::string>{"attention"};
    if (kv.has("use_ffn"))
        for (long long v : kv.get_int_list("use_ffn")) s.ffn_flags.push_back(static_cast<int>(v));
    else
        s.ffn_flags = {1};
    if (kv.has("t0"))
        for (long long v : kv.get_int_list("t0")) s.t0s.push_back(static_cast<int>(v));
    else
        s.t0s = {-1};

    s.model.d_in = static_cast<int>(kv.get_int_or("d_in", 64));
    s.model.d_model = static_cast<int>(kv.get_int_or("d_model", 64));
    s.model.ffn_hidden = static_cast<int>(kv.get_int_or("ffn_hidden", 128));
    s.model.heads = static_cast<int>(kv.get_int_or("heads", 1));
    s.model.layers = static_cast<int>(kv.get_int_or("layers", 1));
    s.model.residual = kv.get_bool_or("residual", true);
    const std::string pos = kv.get_string_or("positional", "sinusoidal");
    if (pos != "sinusoidal" && pos != "none")
        throw SpecError("positional must be sinusoidal or none");
    s.model.positional = pos == "sinusoidal" ? Positional::sinusoidal : Positional::none;

    s.train_opts.steps = static_cast<int>(kv.get_int_or("steps", 500));
    s.train_opts.n_pos = static_cast<int>(kv.get_int_or("n_pos", 32));
    s.train_opts.batch_size = static_cast<int>(kv.get_int_or("batch_size", 8));
    s.train_opts.lr = kv.get_double_or("lr", 1e-3);

    s.out_csv = kv.get_string_or("out", "results.csv");
    if (s.predictor == "fsmp") {
        s.modes = {""};
        s.ffn_flags = {-1};
        s.t0s = {-2};
    }
    s.validate();
    return s;
}

std::vector<GridPoint> expand_grid(const ExperimentSpec& spec) {
    std::vector<std::string> modes = spec.modes;
    std::vector<int> ffns = spec.ffn_flags;
    std::vector<int> t0s = spec.t0s;
    if (!is_transformer(spec)) {
        modes = {""};
        ffns = {-1};
        t0s = {-2};
    } else {
        if (modes.empty()) modes = {"attention"};
        if (ffns.empty()) ffns = {1};
        if (t0s.empty()) t0s = {-1};
    }
    std::vector<GridPoint> out;
    for (int k : spec.ks)
        for (long long n : spec.ns)
            for (const std::string& mode : modes)
                for (int ffn : ffns)
                    for (int t0 : t0s)
                        for (std::uint64_t seed : spec.seeds)
                            out.push_back({k, n, seed, mode, ffn, t0});
    return out;
}

std::string point_signature(const ExperimentSpec& spec, const GridPoint& p) {
    std::ostringstream s;
    s << kVersion << '|'
      << (spec.source ? spec.source->id : "corpus:" + spec.corpus_path) << '|'
      << to_string(spec.tokenizer) << '|' << spec.vocab_cap << '|' << spec.predictor
      << '|' << spec.evaluation << '|' << fmt(spec.alpha) << '|' << spec.test_n << '|'
      << spec.enum_budget << '|' << spec.model.d_in << 'x' << spec.model.d_model << 'x'
      << spec.model.ffn_hidden << 'h' << spec.model.heads << 'L' << spec.model.layers
      << 'r' << spec.model.residual << 'p' << static_cast<int>(spec.model.positional)
      << '|' << spec.train_opts.steps << ',' << spec.train_opts.n_pos << ','
      << spec.train_opts.batch_size << ',' << fmt(spec.train_opts.lr) << '|' << p.k
      << '|' << p.n << '|' << p.seed << '|' << p.mode << '|' << p.use_ffn << '|'
      << p.t0;
    return s.str();
}

namespace {

void run_fsmp_point(const ExperimentSpec& spec, const GridPoint& p, ResultRecord& r) {
    const SourceSpec& src = *spec.source;
    LabeledDataset d_train = generate(src, static_cast<std::size_t>(p.n), p.seed);
    BayesEstimator est = BayesEstimator::fit(
        StateFunction::identity(p.k, src.input_vocab.size), d_train, spec.alpha);
    r.train_loss_nats = est.empirical_test_loss(d_train, LogBase::nats);
    if (spec.evaluation == "exact") {
        r.test_loss_nats =
            exact_expected_test_loss(est, src, LogBase::nats, spec.enum_budget);
    } else {
        LabeledDataset d_test = generate(src, spec.test_n, kTestStreamSeed);
        r.test_loss_nats = est.empirical_test_loss(d_test, LogBase::nats);
    }
    try {
        r.limit_bits = theorem1_limit(src, p.k, LogBase::bits, spec.enum_budget);
    } catch (const CapacityError&) {
        if (spec.evaluation == "exact") throw;  // exact eval already enumerated
    }
}

void run_transformer_point(const ExperimentSpec& spec, const GridPoint& p,
                           const LabeledDataset* corpus, ResultRecord& r) {
    LabeledDataset d_train, d_test;
    if (spec.source) {
        d_train = generate(*spec.source, static_cast<std::size_t>(p.n), p.seed);
        d_test = generate(*spec.source, spec.test_n, kTestStreamSeed);
    } else {
        // leading slice trains, the held-out tail evaluates
        const std::size_t held = std::max<std::size_t>(corpus->size() / 10, 1);
        const std::size_t pool = corpus->size() - held;
        const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(p.n), pool);
        d_train.inputs.vocab = corpus->inputs.vocab;
        d_train.labels.vocab = corpus->labels.vocab;
        d_train.inputs.tokens.assign(corpus->inputs.tokens.begin(),
                                     corpus->inputs.tokens.begin() + static_cast<std::ptrdiff_t>(take));
        d_train.labels.tokens.assign(corpus->labels.tokens.begin(),
                                     corpus->labels.tokens.begin() + static_cast<std::ptrdiff_t>(take));
        d_test.inputs.vocab = corpus->inputs.vocab;
        d_test.labels.vocab = corpus->labels.vocab;
        d_test.inputs.tokens.assign(corpus->inputs.tokens.end() - static_cast<std::ptrdiff_t>(held),
                                    corpus->inputs.tokens.end());
        d_test.labels.tokens.assign(corpus->labels.tokens.end() - static_cast<std::ptrdiff_t>(held),
                                    corpus->labels.tokens.end());
    }

    ModelConfig cfg = spec.model;
    cfg.input_vocab = d_train.inputs.vocab.size;
    cfg.label_vocab = d_train.labels.vocab.size;
    cfg.span = p.k;
    cfg.mode = attn_mode_from_string(p.mode);
    cfg.use_ffn = p.use_ffn == 1;

    TrainOpts opts = spec.train_opts;
    opts.seed = p.seed;
    if (p.t0 >= 0)
        opts.window_starts =
            augment_window_starts(d_train.size(), {p.t0, opts.n_pos});

    TrainResult tr = train(cfg, d_train, opts);
    r.train_loss_nats = tr.loss_trace.back();
    r.test_loss_nats = empirical_model_loss(tr.params, d_test, LogBase::nats,
                                            static_cast<std::size_t>(opts.n_pos));
    if (spec.source) {
        try {
            r.limit_bits = theorem1_limit(*spec.source, p.k, LogBase::bits, spec.enum_budget);
        } catch (const CapacityError&) {
        }
    }
}

}  // namespace

ResultRecord run_point(const ExperimentSpec& spec, const GridPoint& p,
                       const LabeledDataset* corpus) {
    ResultRecord r;
    r.point = p;
    r.source_id = spec.source ? spec.source->id : "corpus:" + spec.corpus_path;
    r.predictor = spec.predictor;
    r.evaluation = spec.evaluation;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (is_transformer(spec))
            run_transformer_point(spec, p, corpus, r);
        else
            run_fsmp_point(spec, p, r);
        if (std::isfinite(r.test_loss_nats)) {
            r.test_loss_bits = r.test_loss_nats / std::numbers::ln2;
            if (std::isfinite(r.limit_bits))
                r.excess_bits = r.test_loss_bits - r.limit_bits;
        }
    } catch (const CapacityError& e) {
        r.status = std::string("capacity: ") + e.what();
    } catch (const NumericalError& e) {
        r.status = std::string("numerical: ") + e.what();
    }
    r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<std::string> result_columns() {
    return {"source",        "predictor",      "evaluation",     "mode",
            "use_ffn",       "t0",             "k",              "n",
            "seed",          "train_loss_nats", "test_loss_nats", "test_loss_bits",
            "limit_bits",    "excess_bits",    "wall_s",         "status",
            "version"};
}

std::vector<std::string> result_fields(const ResultRecord& r) {
    return {r.source_id,
            r.predictor,
            r.evaluation,
            r.point.mode.empty() ? "-" : r.point.mode,
            r.point.use_ffn < 0 ? "-" : std::to_string(r.point.use_ffn),
            r.point.t0 < -1 ? "-" : std::to_string(r.point.t0),
            std::to_string(r.point.k),
            std::to_string(r.point.n),
            std::to_string(r.point.seed),
            fmt(r.train_loss_nats),
            fmt(r.test_loss_nats),
            fmt(r.test_loss_bits),
            fmt(r.limit_bits),
            fmt(r.excess_bits),
            fmt(r.wall_s),
            r.status,
            r.version};
}

SweepOutcome run(const ExperimentSpec& spec, int workers) {
    spec.validate();
    if (workers < 1) throw SpecError("worker count must be >= 1");

    LabeledDataset corpus;
    const bool corpus_based = !spec.corpus_path.empty();
    if (corpus_based) corpus = ingest_corpus(spec.corpus_path, spec.tokenizer, spec.vocab_cap);

    const std::string journal_path = spec.out_csv + ".journal";
    std::unordered_set<std::uint64_t> done;
    {
        std::ifstream in(journal_path);
        std::string line;
        while (std::getline(in, line)) {
            std::istringstream row(line);
            std::uint64_t key = 0;
            if (row >> std::hex >> key) done.insert(key);
        }
    }

    const std::vector<GridPoint> grid = expand_grid(spec);
    std::vector<std::pair<std::size_t, GridPoint>> todo;
    std::vector<std::uint64_t> keys;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const std::uint64_t key = fnv1a64(point_signature(spec, grid[i]));
        if (done.count(key)) continue;
        todo.emplace_back(i, grid[i]);
        keys.push_back(key);
    }

    SweepOutcome outcome;
    outcome.skipped = grid.size() - todo.size();
    if (todo.empty()) return outcome;

    std::vector<ResultRecord> fresh(todo.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex io;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= todo.size() || failed.load()) return;
            try {
                ResultRecord r = run_point(spec, todo[i].second,
                                           corpus_based ? &corpus : nullptr);
                if (spec.evaluation == "exact" && r.status == "ok" &&
                    r.excess_bits < -1e-6)
                    throw NumericalError("excess " + fmt(r.excess_bits) +
                                         " bits below the entropy limit");
                std::lock_guard<std::mutex> lock(io);
                append_csv_row(spec.out_csv, result_columns(), result_fields(r));
                std::ofstream j(journal_path, std::ios::app);
                j << std::hex << keys[i] << std::dec << ' ' << r.status << '\n';
                fresh[i] = std::move(r);
            } catch (...) {
                std::lock_guard<std::mutex> lock(io);
                if (!failed.exchange(true)) first_error = std::current_exception();
                return;
            }
        }
    };

    const int pool = std::min<int>(workers, static_cast<int>(todo.size()));
    std::vector<std::thread> threads;
    for (int w = 1; w < pool; ++w) threads.emplace_back(worker);
    worker();
    for (std::thread& t : threads) t.join();
    if (failed.load()) std::rethrow_exception(first_error);

    outcome.fresh = std::move(fresh);
    return outcome;
}

}  // namespace predlab
