#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "predlab/augment.hpp"
#include "predlab/csv.hpp"
#include "predlab/fsmp.hpp"
#include "predlab/harness.hpp"
#include "predlab/ingest.hpp"
#include "predlab/kvfile.hpp"
#include "predlab/limits.hpp"
#include "predlab/markov.hpp"
#include "predlab/seq.hpp"
#include "predlab/svgplot.hpp"
#include "predlab/transformer.hpp"

namespace {

using namespace predlab;

LogBase base_from(const std::string& name) {
    if (name == "bits") return LogBase::bits;
    if (name == "nats") return LogBase::nats;
    throw SpecError("base must be bits or nats, got '" + name + "'");
}

int run_sweep(const std::string& spec_path, const std::string& out_override,
              std::optional<std::uint64_t> seed_override, int workers,
              const char* required_predictor, bool require_t0_grid) {
    KvFile kv = KvFile::parse_file(spec_path);
    if (require_t0_grid && !kv.has("t0"))
        throw SpecError(spec_path + ": augment-exp needs a t0 grid (key t0)");
    ExperimentSpec spec = ExperimentSpec::from_kv(kv);
    if (required_predictor && spec.predictor != required_predictor)
        throw SpecError(spec_path + ": this subcommand runs predictor = " +
                        std::string(required_predictor) + ", spec says '" +
                        spec.predictor + "'");
    if (!out_override.empty()) spec.out_csv = out_override;
    if (seed_override) spec.seeds = {*seed_override};
    spec.validate();

    SweepOutcome outcome = run(spec, workers);
    std::size_t failed = 0;
    for (const ResultRecord& r : outcome.fresh)
        if (r.status != "ok") ++failed;
    std::printf("%zu point(s) computed, %zu skipped via journal, %zu failed\n",
                outcome.fresh.size(), outcome.skipped, failed);
    std::printf("results: %s\n", spec.out_csv.c_str());
    return 0;
}

int cmd_gen_data(const std::string& spec_path, const std::string& out,
                 std::uint64_t seed) {
    KvFile kv = KvFile::parse_file(spec_path);
    kv.require_keys({"source", "l", "n"},
                    {"threshold", "flip", "table_seed", "input_vocab", "label_vocab"});
    SourceSpec src = source_from_kv(kv);
    const long long n = kv.get_int("n");
    if (n < 1) throw SpecError("n must be positive");
    LabeledDataset d = generate(src, static_cast<std::size_t>(n), seed);
    save_dataset(d, out);
    std::printf("%s: %zu tokens (inputs |V|=%d, labels |V|=%d) -> %s.{x,y,meta}\n",
                src.id.c_str(), d.size(), d.inputs.vocab.size, d.labels.vocab.size,
                out.c_str());
    return 0;
}

int cmd_train(const std::string& spec_path, std::string out,
              std::optional<std::uint64_t> seed_override) {
    KvFile kv = KvFile::parse_file(spec_path);
    kv.require_keys({"data"},
                    {"d_in", "d_model", "ffn_hidden", "heads", "span", "layers", "mode",
                     "use_ffn", "residual", "positional", "steps", "n_pos", "batch_size",
                     "lr", "seed", "t0", "shuffle_seed", "trace", "out"});
    LabeledDataset d = load_dataset(kv.get_string("data"));

    ModelConfig cfg;
    cfg.input_vocab = d.inputs.vocab.size;
    cfg.label_vocab = d.labels.vocab.size;
    cfg.d_in = static_cast<int>(kv.get_int_or("d_in", cfg.d_in));
    cfg.d_model = static_cast<int>(kv.get_int_or("d_model", cfg.d_model));
    cfg.ffn_hidden = static_cast<int>(kv.get_int_or("ffn_hidden", cfg.ffn_hidden));
    cfg.heads = static_cast<int>(kv.get_int_or("heads", cfg.heads));
    cfg.span = static_cast<int>(kv.get_int_or("span", cfg.span));
    cfg.layers = static_cast<int>(kv.get_int_or("layers", cfg.layers));
    cfg.mode = attn_mode_from_string(kv.get_string_or("mode", "attention"));
    cfg.use_ffn = kv.get_bool_or("use_ffn", cfg.use_ffn);
    cfg.residual = kv.get_bool_or("residual", cfg.residual);
    cfg.positional = kv.get_string_or("positional", "sinusoidal") == "none"
                         ? Positional::none
                         : Positional::sinusoidal;

    TrainOpts opts;
    opts.steps = static_cast<int>(kv.get_int_or("steps", opts.steps));
    opts.n_pos = static_cast<int>(kv.get_int_or("n_pos", opts.n_pos));
    opts.batch_size = static_cast<int>(kv.get_int_or("batch_size", opts.batch_size));
    opts.lr = kv.get_double_or("lr", opts.lr);
    opts.seed = seed_override ? *seed_override
                              : static_cast<std::uint64_t>(kv.get_int_or("seed", 0));
    const int t0 = static_cast<int>(kv.get_int_or("t0", -1));
    if (t0 >= 0) {
        std::optional<std::uint64_t> shuffle;
        if (kv.has("shuffle_seed"))
            shuffle = static_cast<std::uint64_t>(kv.get_int("shuffle_seed"));
        opts.window_starts =
            augment_window_starts(d.size(), AugmentSpec{t0, opts.n_pos}, shuffle);
    }

    if (out.empty()) out = kv.get_string_or("out", "model.ckpt");
    TrainResult res = train(cfg, d, opts);
    save_params(res.params, out);

    const std::string trace_path = kv.get_string_or("trace", out + ".trace.csv");
    CsvTable trace;
    trace.columns = {"step", "train_loss_nats"};
    for (std::size_t i = 0; i < res.loss_trace.size(); ++i)
        trace.rows.push_back(
            {std::to_string(i + 1), format_double(res.loss_trace[i])});
    write_csv(trace_path, trace);

    std::printf("trained %d step(s); final train loss %.6f nats\n", opts.steps,
                res.loss_trace.empty() ? 0.0 : res.loss_trace.back());
    std::printf("checkpoint: %s\ntrace: %s\n", out.c_str(), trace_path.c_str());
    return 0;
}

int cmd_limits(const std::string& spec_path, const std::string& base_name,
               std::uint64_t seed) {
    KvFile kv = KvFile::parse_file(spec_path);
    kv.require_keys({"source", "l", "k"},
                    {"threshold", "flip", "table_seed", "input_vocab", "label_vocab", "n",
                     "alpha", "budget"});
    SourceSpec src = source_from_kv(kv);
    const LogBase base = base_from(base_name);
    const long long n = kv.get_int_or("n", 1 << 12);
    const double alpha = kv.get_double_or("alpha", 0.0);
    const long long budget = kv.get_int_or("budget", kDefaultEnumBudget);
    if (n < 1) throw SpecError("n must be positive");

    LabeledDataset d = generate(src, static_cast<std::size_t>(n), seed);
    std::printf("%s  (base: %s, fit on n=%lld, seed=%llu, alpha=%g)\n", src.id.c_str(),
                base_name.c_str(), n, static_cast<unsigned long long>(seed), alpha);
    std::printf("%4s  %12s  %12s  %12s\n", "k", "limit", "loss", "slack");
    for (long long kk : kv.get_int_list("k")) {
        const int k = static_cast<int>(kk);
        BayesEstimator est = BayesEstimator::fit(
            StateFunction::identity(k, src.input_vocab.size), d, alpha);
        Theorem2Result r = theorem2_check(
            [&](std::span<const int> w) { return est.predict(w); }, src, k, base,
            budget);
        std::printf("%4d  %12.6f  %12.6f  %12.6f\n", k,
                    theorem1_limit(src, k, base, budget), r.loss, r.slack);
    }
    return 0;
}

int cmd_plot(const std::string& spec_path, std::string out) {
    KvFile kv = KvFile::parse_file(spec_path);
    kv.require_keys({"csv", "x", "y"},
                    {"series", "guides", "log_x", "title", "width", "height", "out"});
    PlotSpec spec;
    spec.x_field = kv.get_string("x");
    spec.y_field = kv.get_string("y");
    spec.series_field = kv.get_string_or("series", "");
    if (kv.has("guides")) spec.guide_fields = kv.get_string_list("guides");
    spec.log_x = kv.get_bool_or("log_x", false);
    spec.title = kv.get_string_or("title", "");
    spec.width = static_cast<int>(kv.get_int_or("width", spec.width));
    spec.height = static_cast<int>(kv.get_int_or("height", spec.height));
    if (out.empty()) out = kv.get_string_or("out", "plot.svg");
    plot_csv_file(kv.get_string("csv"), spec, out);
    std::printf("plot: %s\n", out.c_str());
    return 0;
}

int cmd_ingest(const std::string& spec_path, const std::string& out) {
    KvFile kv = KvFile::parse_file(spec_path);
    kv.require_keys({"corpus"}, {"tokenizer", "vocab_cap"});
    Tokenizer tok = tokenizer_from_string(kv.get_string_or("tokenizer", "char"));
    const int cap = static_cast<int>(kv.get_int_or("vocab_cap", 256));
    LabeledDataset d = ingest_corpus(kv.get_string("corpus"), tok, cap);
    save_dataset(d, out);
    std::printf("%zu positions, vocab %d (incl. unk) -> %s.{x,y,meta}\n", d.size(),
                d.inputs.vocab.size, out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sequence prediction experiments: finite-state Markov estimators, "
                 "a small trainable transformer, and sweep tooling"};
    app.require_subcommand(1);

    std::string spec_path, out, base_name = "bits";
    std::uint64_t seed = 1;
    int workers = 1;
    bool seed_given = false;

    auto add_spec = [&](CLI::App* sub) {
        sub->add_option("--spec", spec_path, "key = value spec file")
            ->required()
            ->check(CLI::ExistingFile);
    };
    auto add_seed = [&](CLI::App* sub, const char* help) {
        sub->add_option("--seed", seed, help)->each([&](const std::string&) {
            seed_given = true;
        });
    };

    CLI::App* gen = app.add_subcommand("gen-data", "sample a synthetic stream to files");
    add_spec(gen);
    gen->add_option("--out", out, "dataset base path (.x/.y/.meta)")->required();
    add_seed(gen, "stream seed (default 1)");

    CLI::App* fsmp = app.add_subcommand("fsmp-run", "sweep the count-based estimator");
    CLI::App* sweep = app.add_subcommand("sweep", "run any experiment grid");
    CLI::App* aug = app.add_subcommand("augment-exp", "shift-augmentation grid (n x t0)");
    for (CLI::App* sub : {fsmp, sweep, aug}) {
        add_spec(sub);
        sub->add_option("--out", out, "override the spec's output CSV");
        sub->add_option("--workers", workers, "parallel grid points (default 1)")
            ->check(CLI::PositiveNumber);
        add_seed(sub, "replace the spec's seed grid with this one seed");
    }

    CLI::App* train_cmd = app.add_subcommand("train", "fit a transformer checkpoint");
    add_spec(train_cmd);
    train_cmd->add_option("--out", out, "checkpoint path (default from spec)");
    add_seed(train_cmd, "override the spec's training seed");

    CLI::App* limits_cmd =
        app.add_subcommand("limits", "entropy limits and lower-bound slack per k");
    add_spec(limits_cmd);
    limits_cmd->add_option("--base", base_name, "bits or nats (default bits)");
    add_seed(limits_cmd, "seed of the fitted reference stream (default 1)");

    CLI::App* plot_cmd = app.add_subcommand("plot", "render a results CSV to SVG");
    add_spec(plot_cmd);
    plot_cmd->add_option("--out", out, "SVG path (default from spec)");

    CLI::App* ingest_cmd = app.add_subcommand("ingest", "tokenize a text corpus");
    add_spec(ingest_cmd);
    ingest_cmd->add_option("--out", out, "dataset base path (.x/.y/.meta)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::optional<std::uint64_t> seed_opt =
        seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt;
    try {
        if (*gen) return cmd_gen_data(spec_path, out, seed);
        if (*fsmp) return run_sweep(spec_path, out, seed_opt, workers, "fsmp", false);
        if (*sweep) return run_sweep(spec_path, out, seed_opt, workers, nullptr, false);
        if (*aug) return run_sweep(spec_path, out, seed_opt, workers, "transformer", true);
        if (*train_cmd) return cmd_train(spec_path, out, seed_opt);
        if (*limits_cmd) return cmd_limits(spec_path, base_name, seed);
        if (*plot_cmd) return cmd_plot(spec_path, out);
        if (*ingest_cmd) return cmd_ingest(spec_path, out);
    } catch (const CapacityError& e) {
        std::fprintf(stderr, "capacity error: %s\n", e.what());
        return 3;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
