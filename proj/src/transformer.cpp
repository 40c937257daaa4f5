#include "predlab/transformer.hpp"

#include <cmath>
#include <fstream>

#include "predlab/binio.hpp"

namespace predlab {

namespace {

constexpr std::string_view kCkptMagic = "PLCKPT01";
constexpr std::uint64_t kInitStream = 0x7c6bd8a31a5f27b9ULL;
constexpr std::uint64_t kBatchStream = 0x2545f4914f6cdd1dULL;

Matrix uniform_span_weights(int n, int span) {
    Matrix u(n, n);
    for (int i = 0; i < n; ++i) {
        int lo = std::max(0, i - span + 1);
        double w = 1.0 / (i - lo + 1);
        for (int j = lo; j <= i; ++j) u.at(i, j) = w;
    }
    return u;
}

Matrix init_matrix(int rows, int cols, double half_range, std::mt19937_64& g) {
    Matrix m(rows, cols);
    for (double& v : m.a) v = (2.0 * uniform01(g) - 1.0) * half_range;
    return m;
}

int layer_input_width(const ModelConfig& cfg, int layer) {
    return layer == 0 ? cfg.d_in : cfg.d_model;
}

int mixing_stage(Tape& t, int x, const ParamNodes::Layer& ln, const ModelConfig& cfg) {
    const int n = t.val(x).rows;
    int v = t.matmul(x, ln.wv);
    if (cfg.mode == AttnMode::aggregation) return t.const_matmul(uniform_span_weights(n, cfg.span), v);
    int q = t.matmul(x, ln.wq);
    int k = t.matmul(x, ln.wk);
    const int dh = cfg.d_model / cfg.heads;
    std::vector<int> heads;
    for (int h = 0; h < cfg.heads; ++h) {
        int qh = t.slice_cols(q, h * dh, dh);
        int kh = t.slice_cols(k, h * dh, dh);
        int vh = t.slice_cols(v, h * dh, dh);
        int logits = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
        heads.push_back(t.matmul(t.causal_span_softmax(logits, cfg.span), vh));
    }
    return heads.size() == 1 ? heads[0] : t.concat_cols(heads);
}

}  // namespace

AttnMode attn_mode_from_string(const std::string& s) {
    if (s == "attention") return AttnMode::attention;
    if (s == "aggregation") return AttnMode::aggregation;
    throw SpecError("unknown mixing mode '" + s + "'");
}

std::string to_string(AttnMode m) {
    return m == AttnMode::attention ? "attention" : "aggregation";
}

void ModelConfig::validate() const {
    if (input_vocab < 2 || label_vocab < 2) throw SpecError("vocabularies must have size >= 2");
    if (d_in < 1 || d_model < 1 || ffn_hidden < 1) throw SpecError("model widths must be >= 1");
    if (heads < 1 || d_model % heads != 0)
        throw SpecError("head count must divide the model width");
    if (span < 1) throw SpecError("span must be >= 1");
    if (layers < 1) throw SpecError("layer count must be >= 1");
    if (residual && d_in != d_model)
        throw SpecError("residual additions need matching input and model widths");
}

TransformerParams TransformerParams::init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 g(mix64(seed ^ kInitStream));
    TransformerParams p;
    p.config = cfg;
    p.embedding = init_matrix(cfg.input_vocab, cfg.d_in,
                              1.0 / std::sqrt(static_cast<double>(cfg.d_in)), g);
    for (int l = 0; l < cfg.layers; ++l) {
        const int din = layer_input_width(cfg, l);
        const double wscale = 1.0 / std::sqrt(static_cast<double>(din));
        LayerParams lp;
        lp.wq = init_matrix(din, cfg.d_model, wscale, g);
        lp.wk = init_matrix(din, cfg.d_model, wscale, g);
        lp.wv = init_matrix(din, cfg.d_model, wscale, g);
        lp.w1 = init_matrix(cfg.d_model, cfg.ffn_hidden,
                            1.0 / std::sqrt(static_cast<double>(cfg.d_model)), g);
        lp.b1 = Matrix(1, cfg.ffn_hidden);
        lp.w2 = init_matrix(cfg.ffn_hidden, cfg.d_model,
                            1.0 / std::sqrt(static_cast<double>(cfg.ffn_hidden)), g);
        lp.b2 = Matrix(1, cfg.d_model);
        p.layers.push_back(std::move(lp));
    }
    p.output = init_matrix(cfg.d_model, cfg.label_vocab,
                           1.0 / std::sqrt(static_cast<double>(cfg.d_model)), g);
    return p;
}

std::vector<std::pair<std::string, Matrix*>> TransformerParams::named_tensors() {
    std::vector<std::pair<std::string, Matrix*>> out;
    out.emplace_back("embedding", &embedding);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        std::string prefix = "layer" + std::to_string(l) + ".";
        out.emplace_back(prefix + "wq", &layers[l].wq);
        out.emplace_back(prefix + "wk", &layers[l].wk);
        out.emplace_back(prefix + "wv", &layers[l].wv);
        out.emplace_back(prefix + "w1", &layers[l].w1);
        out.emplace_back(prefix + "b1", &layers[l].b1);
        out.emplace_back(prefix + "w2", &layers[l].w2);
        out.emplace_back(prefix + "b2", &layers[l].b2);
    }
    out.emplace_back("output", &output);
    return out;
}

std::vector<std::pair<std::string, const Matrix*>> TransformerParams::named_tensors() const {
    std::vector<std::pair<std::string, const Matrix*>> out;
    for (auto& [name, m] : const_cast<TransformerParams*>(this)->named_tensors())
        out.emplace_back(name, m);
    return out;
}

Matrix positional_encoding(int n_pos, int width) {
    Matrix pe(n_pos, width);
    for (int pos = 0; pos < n_pos; ++pos) {
        for (int j = 0; j < width; ++j) {
            double rate = std::pow(10000.0, -static_cast<double>(j - j % 2) / width);
            double angle = pos * rate;
            pe.at(pos, j) = j % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

ParamNodes leaf_params(Tape& tape, const TransformerParams& params) {
    ParamNodes n;
    n.embedding = tape.leaf(params.embedding);
    for (const LayerParams& lp : params.layers) {
        ParamNodes::Layer ln;
        ln.wq = tape.leaf(lp.wq);
        ln.wk = tape.leaf(lp.wk);
        ln.wv = tape.leaf(lp.wv);
        ln.w1 = tape.leaf(lp.w1);
        ln.b1 = tape.leaf(lp.b1);
        ln.w2 = tape.leaf(lp.w2);
        ln.b2 = tape.leaf(lp.b2);
        n.layers.push_back(ln);
    }
    n.output = tape.leaf(params.output);
    return n;
}

std::vector<int> ParamNodes::in_tensor_order(const ModelConfig&) const {
    std::vector<int> out;
    out.push_back(embedding);
    for (const Layer& l : layers) {
        out.push_back(l.wq);
        out.push_back(l.wk);
        out.push_back(l.wv);
        out.push_back(l.w1);
        out.push_back(l.b1);
        out.push_back(l.w2);
        out.push_back(l.b2);
    }
    out.push_back(output);
    return out;
}

int window_logits(Tape& tape, const ParamNodes& nodes, const ModelConfig& cfg,
                  std::span<const int> tokens) {
    if (tokens.empty()) throw SpecError("empty token window");
    std::vector<int> ids(tokens.begin(), tokens.end());
    int x = tape.gather_rows(nodes.embedding, ids);
    if (cfg.positional == Positional::sinusoidal)
        x = tape.add_const(x, positional_encoding(static_cast<int>(ids.size()), cfg.d_in));
    for (int l = 0; l < cfg.layers; ++l) {
        const ParamNodes::Layer& ln = nodes.layers[static_cast<std::size_t>(l)];
        int mixed = mixing_stage(tape, x, ln, cfg);
        int h = cfg.residual ? tape.add(x, mixed) : mixed;
        if (cfg.use_ffn) {
            int f = tape.relu(tape.add_row(tape.matmul(h, ln.w1), ln.b1));
            f = tape.add_row(tape.matmul(f, ln.w2), ln.b2);
            h = cfg.residual ? tape.add(h, f) : f;
        }
        x = h;
    }
    return tape.matmul(x, nodes.output);
}

namespace {

Matrix single_stage(const Matrix& x, const LayerParams& lp, const ModelConfig& cfg,
                    AttnMode mode) {
    ModelConfig c = cfg;
    c.mode = mode;
    c.validate();
    if (x.cols != cfg.d_in) throw SpecError("input width does not match the model");
    if (x.rows < 1) throw SpecError("empty input sequence");
    Tape tape;
    int xn = tape.leaf(x);
    ParamNodes::Layer ln;
    ln.wq = tape.leaf(lp.wq);
    ln.wk = tape.leaf(lp.wk);
    ln.wv = tape.leaf(lp.wv);
    return tape.val(mixing_stage(tape, xn, ln, c));
}

}  // namespace

Matrix attend(const Matrix& x, const LayerParams& lp, const ModelConfig& cfg) {
    return single_stage(x, lp, cfg, AttnMode::attention);
}

Matrix aggregate(const Matrix& x, const LayerParams& lp, const ModelConfig& cfg) {
    return single_stage(x, lp, cfg, AttnMode::aggregation);
}

std::vector<Distribution> forward(const TransformerParams& params,
                                  std::span<const int> tokens) {
    params.config.validate();
    Tape tape;
    ParamNodes nodes = leaf_params(tape, params);
    int logits = window_logits(tape, nodes, params.config, tokens);
    const Matrix& L = tape.val(logits);
    std::vector<Distribution> out;
    out.reserve(static_cast<std::size_t>(L.rows));
    for (int i = 0; i < L.rows; ++i) {
        double m = L.at(i, 0);
        for (int j = 1; j < L.cols; ++j) m = std::max(m, L.at(i, j));
        Distribution d;
        d.probs.resize(static_cast<std::size_t>(L.cols));
        double z = 0.0;
        for (int j = 0; j < L.cols; ++j) {
            d.probs[static_cast<std::size_t>(j)] = std::exp(L.at(i, j) - m);
            z += d.probs[static_cast<std::size_t>(j)];
        }
        for (double& p : d.probs) p /= z;
        out.push_back(std::move(d));
    }
    return out;
}

TrainResult train(const ModelConfig& cfg, const LabeledDataset& d_train,
                  const TrainOpts& opts) {
    cfg.validate();
    d_train.validate();
    if (opts.steps < 1 || opts.batch_size < 1 || opts.n_pos < 1)
        throw SpecError("bad training options");
    if (d_train.size() < static_cast<std::size_t>(opts.n_pos))
        throw SpecError("dataset shorter than one training window");
    if (d_train.inputs.vocab.size > cfg.input_vocab ||
        d_train.labels.vocab.size > cfg.label_vocab)
        throw SpecError("dataset vocabulary exceeds the model's");

    TrainResult result;
    result.params = TransformerParams::init(cfg, opts.seed);
    auto named = result.params.named_tensors();
    std::vector<Matrix*> tensors;
    for (auto& [name, m] : named) tensors.push_back(m);
    Adam optimizer(tensors, opts.lr);

    std::mt19937_64 g(mix64(opts.seed ^ kBatchStream));
    const std::size_t max_start = d_train.size() - static_cast<std::size_t>(opts.n_pos);
    std::size_t cursor = 0;
    if (opts.window_starts) {
        if (opts.window_starts->empty()) throw SpecError("empty window start list");
        for (std::size_t s : *opts.window_starts)
            if (s > max_start) throw SpecError("window start beyond the stream");
    }

    for (int step = 0; step < opts.steps; ++step) {
        Tape tape;
        ParamNodes nodes = leaf_params(tape, result.params);
        std::vector<int> losses;
        for (int b = 0; b < opts.batch_size; ++b) {
            std::size_t start;
            if (opts.window_starts) {
                start = (*opts.window_starts)[cursor % opts.window_starts->size()];
                ++cursor;
            } else {
                start = uniform_below(g, max_start + 1);
            }
            std::span<const int> tokens(d_train.inputs.tokens.data() + start,
                                        static_cast<std::size_t>(opts.n_pos));
            std::vector<int> labels(d_train.labels.tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                    d_train.labels.tokens.begin() +
                                        static_cast<std::ptrdiff_t>(start + opts.n_pos));
            losses.push_back(
                tape.softmax_xent_mean(window_logits(tape, nodes, cfg, tokens), labels));
        }
        int loss = tape.mean_scalars(losses);
        double value = tape.val(loss).at(0, 0);
        if (!std::isfinite(value))
            throw NumericalError("training loss became non-finite at step " +
                                 std::to_string(step));
        result.loss_trace.push_back(value);
        tape.backward(loss);
        std::vector<const Matrix*> grads;
        for (int id : nodes.in_tensor_order(cfg)) grads.push_back(&tape.grad(id));
        optimizer.step(grads);
    }
    return result;
}

double empirical_model_loss(const TransformerParams& params, const LabeledDataset& d,
                            LogBase base, std::size_t window) {
    d.validate();
    if (d.size() == 0) throw SpecError("empty evaluation set");
    if (window == 0) throw SpecError("evaluation window must be >= 1");
    double total = 0.0;
    for (std::size_t start = 0; start < d.size(); start += window) {
        std::size_t len = std::min(window, d.size() - start);
        std::span<const int> tokens(d.inputs.tokens.data() + start, len);
        auto preds = forward(params, tokens);
        for (std::size_t i = 0; i < len; ++i)
            total += log_loss(preds[i], d.labels.tokens[start + i], LogBase::nats);
    }
    return from_nats(total / static_cast<double>(d.size()), base);
}

void save_params(const TransformerParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SpecError("cannot write " + path);
    binio::write_magic(out, kCkptMagic);
    binio::write_pod<std::uint32_t>(out, 1);
    const ModelConfig& c = params.config;
    for (int v : {c.input_vocab, c.label_vocab, c.d_in, c.d_model, c.ffn_hidden, c.heads,
                  c.span, c.layers})
        binio::write_pod<std::int32_t>(out, v);
    binio::write_pod<std::uint8_t>(out, c.mode == AttnMode::aggregation ? 1 : 0);
    binio::write_pod<std::uint8_t>(out, c.use_ffn ? 1 : 0);
    binio::write_pod<std::uint8_t>(out, c.residual ? 1 : 0);
    binio::write_pod<std::uint8_t>(out, c.positional == Positional::sinusoidal ? 1 : 0);
    auto named = params.named_tensors();
    binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
    for (auto& [name, m] : named) {
        binio::write_pod<std::int32_t>(out, m->rows);
        binio::write_pod<std::int32_t>(out, m->cols);
        out.write(reinterpret_cast<const char*>(m->a.data()),
                  static_cast<std::streamsize>(m->a.size() * sizeof(double)));
    }
    if (!out) throw SpecError("short write to " + path);
}

TransformerParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot read " + path);
    binio::expect_magic(in, kCkptMagic);
    if (binio::read_pod<std::uint32_t>(in) != 1)
        throw SpecError("unsupported checkpoint version in " + path);
    ModelConfig c;
    c.input_vocab = binio::read_pod<std::int32_t>(in);
    c.label_vocab = binio::read_pod<std::int32_t>(in);
    c.d_in = binio::read_pod<std::int32_t>(in);
    c.d_model = binio::read_pod<std::int32_t>(in);
    c.ffn_hidden = binio::read_pod<std::int32_t>(in);
    c.heads = binio::read_pod<std::int32_t>(in);
    c.span = binio::read_pod<std::int32_t>(in);
    c.layers = binio::read_pod<std::int32_t>(in);
    c.mode = binio::read_pod<std::uint8_t>(in) ? AttnMode::aggregation : AttnMode::attention;
    c.use_ffn = binio::read_pod<std::uint8_t>(in) != 0;
    c.residual = binio::read_pod<std::uint8_t>(in) != 0;
    c.positional =
        binio::read_pod<std::uint8_t>(in) ? Positional::sinusoidal : Positional::none;
    c.validate();
    TransformerParams p = TransformerParams::init(c, 0);
    auto named = p.named_tensors();
    auto count = binio::read_pod<std::uint32_t>(in);
    if (count != named.size()) throw SpecError("checkpoint tensor count mismatch in " + path);
    for (auto& [name, m] : named) {
        int rows = binio::read_pod<std::int32_t>(in);
        int cols = binio::read_pod<std::int32_t>(in);
        if (rows != m->rows || cols != m->cols)
            throw SpecError("checkpoint tensor shape mismatch in " + path);
        in.read(reinterpret_cast<char*>(m->a.data()),
                static_cast<std::streamsize>(m->a.size() * sizeof(double)));
        if (!in) throw SpecError("truncated checkpoint " + path);
    }
    return p;
}

}  // namespace predlab
