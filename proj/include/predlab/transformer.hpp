#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "predlab/autodiff.hpp"
#include "predlab/seq.hpp"

namespace predlab {

enum class AttnMode { attention, aggregation };
enum class Positional { sinusoidal, none };

AttnMode attn_mode_from_string(const std::string& s);
std::string to_string(AttnMode m);

struct ModelConfig {
    int input_vocab = 2;
    int label_vocab = 2;
    int d_in = 64;
    int d_model = 64;
    int ffn_hidden = 128;
    int heads = 1;
    int span = 1;  // how many past positions each output may attend to, itself included
    int layers = 1;
    AttnMode mode = AttnMode::attention;
    bool use_ffn = true;
    bool residual = true;
    Positional positional = Positional::sinusoidal;

    void validate() const;
};

struct LayerParams {
    Matrix wq, wk, wv;  // input width x d_model
    Matrix w1, b1;      // d_model x ffn_hidden, 1 x ffn_hidden
    Matrix w2, b2;      // ffn_hidden x d_model, 1 x d_model
};

struct TransformerParams {
    ModelConfig config;
    Matrix embedding;  // input_vocab x d_in
    std::vector<LayerParams> layers;
    Matrix output;  // d_model x label_vocab

    static TransformerParams init(const ModelConfig& cfg, std::uint64_t seed);
    std::vector<std::pair<std::string, Matrix*>> named_tensors();
    std::vector<std::pair<std::string, const Matrix*>> named_tensors() const;
};

// sin/cos absolute position table, n_pos x width
Matrix positional_encoding(int n_pos, int width);

// One block's mixing stage on a sequence of input vectors: span-masked
// scaled dot-product attention, or the uniform window average in aggregation
// mode. Heads are sliced from d_model, mixed independently, and reconcatenated.
Matrix attend(const Matrix& x, const LayerParams& lp, const ModelConfig& cfg);
Matrix aggregate(const Matrix& x, const LayerParams& lp, const ModelConfig& cfg);

// Full stack: embedding (+ positions) -> layers -> output projection -> softmax.
// Row i is the label distribution predicted at position i.
std::vector<Distribution> forward(const TransformerParams& params,
                                  std::span<const int> tokens);

// Builds the loss graph for one window on an existing tape. Exposed for
// gradient checking; training uses it internally.
struct ParamNodes {
    int embedding = -1;
    struct Layer {
        int wq = -1, wk = -1, wv = -1, w1 = -1, b1 = -1, w2 = -1, b2 = -1;
    };
    std::vector<Layer> layers;
    int output = -1;

    std::vector<int> in_tensor_order(const ModelConfig& cfg) const;
};

ParamNodes leaf_params(Tape& tape, const TransformerParams& params);
int window_logits(Tape& tape, const ParamNodes& nodes, const ModelConfig& cfg,
                  std::span<const int> tokens);

struct TrainOpts {
    int steps = 500;
    int n_pos = 32;      // tokens per training window
    int batch_size = 8;  // windows per step
    double lr = 1e-3;
    std::uint64_t seed = 0;
    // explicit window start offsets, cycled in order; defaults to uniform
    // random starts when absent
    std::optional<std::vector<std::size_t>> window_starts;
};

struct TrainResult {
    TransformerParams params;
    std::vector<double> loss_trace;  // one mean train loss per step, nats
};

TrainResult train(const ModelConfig& cfg, const LabeledDataset& d_train,
                  const TrainOpts& opts);

// Mean next-label loss over the stream, evaluated in consecutive windows of
// `window` tokens so every position stays inside the trained position range.
double empirical_model_loss(const TransformerParams& params, const LabeledDataset& d,
                            LogBase base, std::size_t window = 128);

void save_params(const TransformerParams& params, const std::string& path);
TransformerParams load_params(const std::string& path);

}  // namespace predlab
