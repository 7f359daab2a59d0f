#pragma once

#include <cmath>
#include <iosfwd>
#include <numeric>
#include <string>
#include <vector>

#include "smlc/dataset.hpp"
#include "smlc/model.hpp"

namespace smlc {

template <typename T>
struct BceResult {
    double loss;        // mean over batch * labels
    Matrix<T> dlogits;  // (sigmoid(z) - y) / (batch * labels)
};

// Per-element stable binary cross-entropy from raw logits:
//   max(z, 0) - z*y + log(1 + exp(-|z|)).
template <typename T>
BceResult<T> bce_with_logits(const Matrix<T>& logits, const Matrix<T>& targets) {
    if (!logits.same_shape(targets))
        throw ValidationError("bce: logits and targets must have the same shape");
    if (logits.empty()) throw ValidationError("bce: empty batch");
    BceResult<T> r;
    r.dlogits = Matrix<T>(logits.rows(), logits.cols());
    const size_t n = logits.size();
    const double inv = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double z = static_cast<double>(logits.data()[i]);
        const double y = static_cast<double>(targets.data()[i]);
        if (y != 0.0 && y != 1.0) throw ValidationError("bce: targets must be binary");
        total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        r.dlogits.data()[i] = static_cast<T>((sigmoid(z) - y) * inv);
    }
    r.loss = total * inv;
    return r;
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    ModelParameters<T> m, v;
    uint64_t t = 0;

    explicit AdamState(const ModelConfig& cfg)
        : m(ModelParameters<T>::zeros_like(cfg)), v(ModelParameters<T>::zeros_like(cfg)) {}
};

// One Adam update with bias correction; arithmetic in double, storage in T.
// A non-finite gradient aborts the step before any state is touched.
template <typename T>
void adam_step(ModelParameters<T>& params, const ModelParameters<T>& grads, AdamState<T>& state,
               const AdamConfig& cfg) {
    if (grads.cfg != params.cfg || state.m.cfg != params.cfg)
        throw ValidationError("adam: parameter, gradient and state shapes must agree");
    auto gt = grads.tensors();
    for (const auto& nt : gt)
        if (!nt.tensor->all_finite())
            throw NumericError("adam: non-finite gradient in " + nt.name + ", step aborted");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    auto pt = params.tensors();
    auto mt = state.m.tensors();
    auto vt = state.v.tensors();
    for (size_t i = 0; i < pt.size(); ++i) {
        T* p = pt[i].tensor->data();
        const T* g = gt[i].tensor->data();
        T* m = mt[i].tensor->data();
        T* v = vt[i].tensor->data();
        const size_t n = pt[i].tensor->size();
        for (size_t j = 0; j < n; ++j) {
            const double gd = static_cast<double>(g[j]);
            const double md = cfg.beta1 * static_cast<double>(m[j]) + (1.0 - cfg.beta1) * gd;
            const double vd = cfg.beta2 * static_cast<double>(v[j]) + (1.0 - cfg.beta2) * gd * gd;
            m[j] = static_cast<T>(md);
            v[j] = static_cast<T>(vd);
            const double mhat = md / bc1;
            const double vhat = vd / bc2;
            p[j] = static_cast<T>(static_cast<double>(p[j]) -
                                  cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
    params.revision += 1;
}

// Shuffled index batches for one epoch. The permutation depends only on
// (seed, epoch); a final partial batch is kept, so 130 items at size 64
// yield batches of 64, 64 and 2.
std::vector<std::vector<size_t>> make_batches(size_t n, size_t batch_size, uint64_t seed,
                                              uint64_t epoch);

// One batch as consumed by forward(): ids for error context, cropped/padded
// features, binary targets.
struct Batch {
    std::vector<std::string> ids;
    std::vector<FeatureSequence> features;
    MatrixF targets;
};

Batch assemble_batch(const Dataset& data, const std::vector<size_t>& indices,
                     size_t target_frames, CropMode mode, Rng* rng);

struct TrainConfig {
    size_t epochs = 12;
    size_t batch_size = 64;
    AdamConfig adam;
    uint64_t seed = 1234;
    // Checkpoints and run.json land here; leave empty to train purely in memory.
    std::string out_dir;
    bool per_epoch_checkpoints = true;
};

struct TrainResult {
    ModelParameters<float> params;
    std::vector<double> epoch_losses;       // sample-weighted mean per epoch
    std::string final_checkpoint_path;      // empty when out_dir was empty
};

// From-scratch training loop: init, shuffle, crop, forward, BCE, backward,
// Adam. Writes one log line per epoch to `log`. Bit-identical for a fixed
// seed regardless of worker count.
TrainResult train(const Dataset& data, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  std::ostream& log);

} // namespace smlc
