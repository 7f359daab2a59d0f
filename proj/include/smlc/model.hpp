#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smlc/errors.hpp"
#include "smlc/features.hpp"
#include "smlc/labels.hpp"
#include "smlc/linalg.hpp"
#include "smlc/rng.hpp"

namespace smlc {

// Decoder shapes. ffn_dim 0 means the conventional 4 * d_model.
struct ModelConfig {
    size_t d_model = 128;
    size_t n_layers = 4;
    size_t n_heads = 8;
    size_t n_labels = kNumLabels;
    size_t input_dim = 80;
    size_t ffn_dim = 0;
    size_t target_frames = 500;

    size_t ffn() const { return ffn_dim == 0 ? 4 * d_model : ffn_dim; }
    size_t head_dim() const { return d_model / n_heads; }

    void validate() const {
        if (d_model < 1 || n_layers < 1 || n_heads < 1 || n_labels < 1 || input_dim < 1 ||
            target_frames < 1)
            throw ConfigError("model config: all dimensions must be >= 1");
        if (d_model % n_heads != 0)
            throw ConfigError("model config: d_model must be divisible by n_heads");
        if (d_model % 2 != 0)
            throw ConfigError("model config: d_model must be even for sinusoidal encodings");
    }

    bool operator==(const ModelConfig&) const = default;
};

constexpr double kLayerNormEps = 1e-5;

template <typename T>
struct AttentionParams {
    Matrix<T> wq, bq, wk, bk, wv, bv, wo, bo; // w: d x d, b: 1 x d
};

template <typename T>
struct DecoderLayerParams {
    Matrix<T> ln1_gain, ln1_bias; // before query self-attention
    AttentionParams<T> self_attn;
    Matrix<T> ln2_gain, ln2_bias; // before cross-attention
    AttentionParams<T> cross_attn;
    Matrix<T> ln3_gain, ln3_bias; // before the feed-forward sublayer
    Matrix<T> ffn_w1, ffn_b1;     // d x F, 1 x F
    Matrix<T> ffn_w2, ffn_b2;     // F x d, 1 x d
};

// How a tensor participates in initialization; also drives serialization.
enum class TensorInit { glorot, zero, one, query_embed };

template <typename T>
struct NamedTensor {
    std::string name;
    Matrix<T>* tensor;
    TensorInit init;
    size_t fan_in = 0;
    size_t fan_out = 0;
};

template <typename T>
struct ConstNamedTensor {
    std::string name;
    const Matrix<T>* tensor;
    TensorInit init;
    size_t fan_in = 0;
    size_t fan_out = 0;
};

// All trainable weights plus the fixed sinusoidal table. The same structure
// doubles as gradient and Adam-moment storage via zeros_like().
template <typename T>
struct ModelParameters {
    ModelConfig cfg;
    Matrix<T> in_proj_w, in_proj_b; // D x d, 1 x d
    Matrix<T> style_queries;        // K x d, row k is the embedding for label k
    std::vector<DecoderLayerParams<T>> layers;
    Matrix<T> head_w; // K x d, head k reads only decoded vector k
    Matrix<T> head_b; // 1 x K
    Matrix<T> pos_encoding; // T x d, fixed, not trained, not serialized

    // Bumped whenever the weights change so a stale ForwardTrace is detectable.
    uint64_t revision = 0;

    static ModelParameters zeros_like(const ModelConfig& cfg);

    // Trainable tensors in canonical declared order.
    std::vector<NamedTensor<T>> tensors();
    std::vector<ConstNamedTensor<T>> tensors() const;
};

// ---------------------------------------------------------------------------
// trace structures (everything backward needs)

template <typename T>
struct LayerNormTrace {
    Matrix<T> xhat;          // rows x d, normalized values
    std::vector<T> inv_std;  // per row
};

template <typename T>
struct AttentionTrace {
    Matrix<T> q, k, v;  // projected M x d, N x d, N x d
    Matrix<T> probs;    // (H*M) x N, block h at rows [h*M, (h+1)*M)
    Matrix<T> ctx;      // M x d, concatenated head outputs before out projection
};

template <typename T>
struct DecoderLayerTrace {
    Matrix<T> x_in;   // K x d, layer input
    LayerNormTrace<T> ln1;
    AttentionTrace<T> self_attn;
    Matrix<T> x_mid;  // after self-attention residual
    LayerNormTrace<T> ln2;
    AttentionTrace<T> cross_attn;
    Matrix<T> x_post; // after cross-attention residual
    LayerNormTrace<T> ln3;
    Matrix<T> ffn_pre; // K x F
    Matrix<T> ffn_act; // K x F
};

template <typename T>
struct SampleTrace {
    Matrix<T> input;   // T x D raw features
    Matrix<T> memory;  // T x d, projected input plus positional encoding
    std::vector<DecoderLayerTrace<T>> layers;
    Matrix<T> decoded; // K x d
};

template <typename T>
struct ForwardTrace {
    ModelConfig cfg;
    uint64_t params_revision = 0;
    std::vector<SampleTrace<T>> samples;
};

template <typename T>
struct ForwardResult {
    Matrix<T> logits; // B x K
    ForwardTrace<T> trace;
};

// ---------------------------------------------------------------------------
// free functions

// PE[t, 2i] = sin(t * w_i), PE[t, 2i+1] = cos(t * w_i), w_i = 10000^(-2i/d).
template <typename T>
Matrix<T> sinusoidal_encoding(size_t n_positions, size_t d);

// Deterministic initialization: affine weights ~ U(-a, a) with
// a = sqrt(6 / (fan_in + fan_out)), biases 0, layer-norm gains 1,
// style queries ~ N(0, 0.02).
template <typename T>
ModelParameters<T> init_parameters(const ModelConfig& cfg, uint64_t seed);

// Multi-head attention with in-op q/k/v/output projections:
// per head, softmax(Q_h K_h^T / sqrt(d/h)) V_h; heads concatenated, then
// output-projected. Throws NumericError on non-finite inputs.
template <typename T>
Matrix<T> attention(const AttentionParams<T>& p, const Matrix<T>& queries,
                    const Matrix<T>& keys, const Matrix<T>& values, size_t n_heads,
                    AttentionTrace<T>* trace = nullptr);

// Full decoder pass. Every feature sequence must carry exactly
// cfg.target_frames frames of dimension cfg.input_dim. Logits come out raw;
// apply predict() for probabilities.
template <typename T>
ForwardResult<T> forward(const ModelParameters<T>& params,
                         const std::vector<FeatureSequence>& batch);

// Elementwise stable sigmoid of the logits.
template <typename T>
Matrix<T> predict(const Matrix<T>& logits);

// Exact analytic gradients for every trainable tensor given dLoss/dlogits.
// The trace must come from a forward() against the same parameter revision.
template <typename T>
ModelParameters<T> backward(const ModelParameters<T>& params, const ForwardTrace<T>& trace,
                            const Matrix<T>& dlogits);

} // namespace smlc

#include "smlc/model_impl.hpp"
