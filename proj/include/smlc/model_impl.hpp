#pragma once

// Template implementations for model.hpp. Include model.hpp, not this file.

#include <cmath>
#include <utility>

namespace smlc {

namespace detail {

constexpr double kGeluCoef = 0.044715;
constexpr double kSqrt2OverPi = 0.7978845608028654;

inline double gelu_scalar(double x) {
    double u = kSqrt2OverPi * (x + kGeluCoef * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

inline double gelu_grad_scalar(double x) {
    double u = kSqrt2OverPi * (x + kGeluCoef * x * x * x);
    double t = std::tanh(u);
    double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoef * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

// out(0, j) += column sums of a.
template <typename T>
void acc_colsum(const Matrix<T>& a, Matrix<T>& out) {
    assert(out.rows() == 1 && out.cols() == a.cols());
    T* o = out.row(0);
    for (size_t i = 0; i < a.rows(); ++i) {
        const T* arow = a.row(i);
        for (size_t j = 0; j < a.cols(); ++j) o[j] += arow[j];
    }
}

// Normalize rows of x; trace keeps what backward needs. Statistics in double.
template <typename T>
void layer_norm(const Matrix<T>& x, const Matrix<T>& gain, const Matrix<T>& bias,
                Matrix<T>& out, LayerNormTrace<T>& tr) {
    const size_t rows = x.rows(), n = x.cols();
    out = Matrix<T>(rows, n);
    tr.xhat = Matrix<T>(rows, n);
    tr.inv_std.assign(rows, T(0));
    const T* g = gain.row(0);
    const T* b = bias.row(0);
    for (size_t i = 0; i < rows; ++i) {
        const T* xr = x.row(i);
        double mu = 0.0;
        for (size_t j = 0; j < n; ++j) mu += static_cast<double>(xr[j]);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (size_t j = 0; j < n; ++j) {
            double dvj = static_cast<double>(xr[j]) - mu;
            var += dvj * dvj;
        }
        var /= static_cast<double>(n);
        double is = 1.0 / std::sqrt(var + kLayerNormEps);
        tr.inv_std[i] = static_cast<T>(is);
        T* xh = tr.xhat.row(i);
        T* orow = out.row(i);
        for (size_t j = 0; j < n; ++j) {
            xh[j] = static_cast<T>((static_cast<double>(xr[j]) - mu) * is);
            orow[j] = g[j] * xh[j] + b[j];
        }
    }
}

// Reconstruct the layer-norm output from its trace (cheaper than storing it).
template <typename T>
Matrix<T> ln_output(const LayerNormTrace<T>& tr, const Matrix<T>& gain, const Matrix<T>& bias) {
    Matrix<T> out(tr.xhat.rows(), tr.xhat.cols());
    const T* g = gain.row(0);
    const T* b = bias.row(0);
    for (size_t i = 0; i < out.rows(); ++i) {
        const T* xh = tr.xhat.row(i);
        T* orow = out.row(i);
        for (size_t j = 0; j < out.cols(); ++j) orow[j] = g[j] * xh[j] + b[j];
    }
    return out;
}

// Returns dx; accumulates dgain / dbias.
template <typename T>
Matrix<T> layer_norm_backward(const Matrix<T>& dout, const Matrix<T>& gain,
                              const LayerNormTrace<T>& tr, Matrix<T>& dgain, Matrix<T>& dbias) {
    const size_t rows = dout.rows(), n = dout.cols();
    Matrix<T> dx(rows, n);
    const T* g = gain.row(0);
    T* dg = dgain.row(0);
    T* db = dbias.row(0);
    for (size_t i = 0; i < rows; ++i) {
        const T* dor = dout.row(i);
        const T* xh = tr.xhat.row(i);
        double m1 = 0.0, m2 = 0.0;
        for (size_t j = 0; j < n; ++j) {
            double dxh = static_cast<double>(dor[j]) * static_cast<double>(g[j]);
            m1 += dxh;
            m2 += dxh * static_cast<double>(xh[j]);
            dg[j] += dor[j] * xh[j];
            db[j] += dor[j];
        }
        m1 /= static_cast<double>(n);
        m2 /= static_cast<double>(n);
        const double is = static_cast<double>(tr.inv_std[i]);
        T* dxr = dx.row(i);
        for (size_t j = 0; j < n; ++j) {
            double dxh = static_cast<double>(dor[j]) * static_cast<double>(g[j]);
            dxr[j] = static_cast<T>(is * (dxh - m1 - static_cast<double>(xh[j]) * m2));
        }
    }
    return dx;
}

// Walks every trainable tensor in canonical order. fn(name, tensor, init, fan_in, fan_out).
template <typename P, typename Fn>
void visit_tensors(P& p, Fn&& fn) {
    const ModelConfig& c = p.cfg;
    const size_t d = c.d_model, din = c.input_dim, f = c.ffn();
    fn("in_proj.w", p.in_proj_w, TensorInit::glorot, din, d);
    fn("in_proj.b", p.in_proj_b, TensorInit::zero, size_t{0}, size_t{0});
    fn("style_queries", p.style_queries, TensorInit::query_embed, size_t{0}, size_t{0});
    for (size_t i = 0; i < p.layers.size(); ++i) {
        auto& lay = p.layers[i];
        const std::string pre = "layer." + std::to_string(i) + ".";
        auto attn = [&](const std::string& tag, auto& a) {
            fn(pre + tag + ".wq", a.wq, TensorInit::glorot, d, d);
            fn(pre + tag + ".bq", a.bq, TensorInit::zero, size_t{0}, size_t{0});
            fn(pre + tag + ".wk", a.wk, TensorInit::glorot, d, d);
            fn(pre + tag + ".bk", a.bk, TensorInit::zero, size_t{0}, size_t{0});
            fn(pre + tag + ".wv", a.wv, TensorInit::glorot, d, d);
            fn(pre + tag + ".bv", a.bv, TensorInit::zero, size_t{0}, size_t{0});
            fn(pre + tag + ".wo", a.wo, TensorInit::glorot, d, d);
            fn(pre + tag + ".bo", a.bo, TensorInit::zero, size_t{0}, size_t{0});
        };
        fn(pre + "ln1.gain", lay.ln1_gain, TensorInit::one, size_t{0}, size_t{0});
        fn(pre + "ln1.bias", lay.ln1_bias, TensorInit::zero, size_t{0}, size_t{0});
        attn("self_attn", lay.self_attn);
        fn(pre + "ln2.gain", lay.ln2_gain, TensorInit::one, size_t{0}, size_t{0});
        fn(pre + "ln2.bias", lay.ln2_bias, TensorInit::zero, size_t{0}, size_t{0});
        attn("cross_attn", lay.cross_attn);
        fn(pre + "ln3.gain", lay.ln3_gain, TensorInit::one, size_t{0}, size_t{0});
        fn(pre + "ln3.bias", lay.ln3_bias, TensorInit::zero, size_t{0}, size_t{0});
        fn(pre + "ffn.w1", lay.ffn_w1, TensorInit::glorot, d, f);
        fn(pre + "ffn.b1", lay.ffn_b1, TensorInit::zero, size_t{0}, size_t{0});
        fn(pre + "ffn.w2", lay.ffn_w2, TensorInit::glorot, f, d);
        fn(pre + "ffn.b2", lay.ffn_b2, TensorInit::zero, size_t{0}, size_t{0});
    }
    // each head row is an independent d -> 1 affine map
    fn("head.w", p.head_w, TensorInit::glorot, d, size_t{1});
    fn("head.b", p.head_b, TensorInit::zero, size_t{0}, size_t{0});
}

// Shared by backward for self- and cross-attention. Adds parameter gradients
// into g and input gradients into dqueries_in / dkeys_in / dvalues_in (which
// may alias each other when the op was self-attention).
template <typename T>
void attention_backward(const AttentionParams<T>& p, const Matrix<T>& queries_in,
                        const Matrix<T>& keys_in, const Matrix<T>& values_in,
                        const AttentionTrace<T>& tr, size_t n_heads, const Matrix<T>& dout,
                        AttentionParams<T>& g, Matrix<T>& dqueries_in, Matrix<T>& dkeys_in,
                        Matrix<T>& dvalues_in) {
    const size_t d = p.wq.rows();
    const size_t m = queries_in.rows(), n = keys_in.rows(), dh = d / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Matrix<T> tmp;

    // output projection
    Matrix<T> dctx;
    matmul_a_bt(dout, p.wo, dctx);
    matmul_at_b(tr.ctx, dout, tmp);
    add_inplace(g.wo, tmp);
    acc_colsum(dout, g.bo);

    Matrix<T> dq(m, d), dk(n, d), dv(n, d);
    Matrix<T> da(m, n), ds(m, n);
    for (size_t h = 0; h < n_heads; ++h) {
        const size_t off = h * dh;
        // da = dctx_h V_h^T; dv_h += A^T dctx_h
        for (size_t i = 0; i < m; ++i) {
            const T* dct = dctx.row(i) + off;
            const T* arow = tr.probs.row(h * m + i);
            T* darow = da.row(i);
            for (size_t j = 0; j < n; ++j) {
                const T* vj = tr.v.row(j) + off;
                double acc = 0.0;
                for (size_t c = 0; c < dh; ++c)
                    acc += static_cast<double>(dct[c]) * static_cast<double>(vj[c]);
                darow[j] = static_cast<T>(acc);
                T* dvj = dv.row(j) + off;
                const T aij = arow[j];
                for (size_t c = 0; c < dh; ++c) dvj[c] += aij * dct[c];
            }
        }
        // softmax backward, folded with the 1/sqrt(dh) score scale
        for (size_t i = 0; i < m; ++i) {
            const T* arow = tr.probs.row(h * m + i);
            const T* darow = da.row(i);
            double dot = 0.0;
            for (size_t j = 0; j < n; ++j)
                dot += static_cast<double>(darow[j]) * static_cast<double>(arow[j]);
            T* dsrow = ds.row(i);
            for (size_t j = 0; j < n; ++j)
                dsrow[j] = static_cast<T>(static_cast<double>(arow[j]) *
                                          (static_cast<double>(darow[j]) - dot) * scale);
        }
        // dq_h = dS K_h; dk_h = dS^T Q_h
        for (size_t i = 0; i < m; ++i) {
            T* dqi = dq.row(i) + off;
            const T* qi = tr.q.row(i) + off;
            const T* dsrow = ds.row(i);
            for (size_t j = 0; j < n; ++j) {
                const T w = dsrow[j];
                const T* kj = tr.k.row(j) + off;
                T* dkj = dk.row(j) + off;
                for (size_t c = 0; c < dh; ++c) {
                    dqi[c] += w * kj[c];
                    dkj[c] += w * qi[c];
                }
            }
        }
    }

    matmul_a_bt(dq, p.wq, tmp);
    add_inplace(dqueries_in, tmp);
    matmul_at_b(queries_in, dq, tmp);
    add_inplace(g.wq, tmp);
    acc_colsum(dq, g.bq);

    matmul_a_bt(dk, p.wk, tmp);
    add_inplace(dkeys_in, tmp);
    matmul_at_b(keys_in, dk, tmp);
    add_inplace(g.wk, tmp);
    acc_colsum(dk, g.bk);

    matmul_a_bt(dv, p.wv, tmp);
    add_inplace(dvalues_in, tmp);
    matmul_at_b(values_in, dv, tmp);
    add_inplace(g.wv, tmp);
    acc_colsum(dv, g.bv);
}

} // namespace detail

template <typename T>
ModelParameters<T> ModelParameters<T>::zeros_like(const ModelConfig& cfg) {
    cfg.validate();
    ModelParameters<T> p;
    p.cfg = cfg;
    const size_t d = cfg.d_model, din = cfg.input_dim, k = cfg.n_labels, f = cfg.ffn();
    p.in_proj_w = Matrix<T>(din, d);
    p.in_proj_b = Matrix<T>(1, d);
    p.style_queries = Matrix<T>(k, d);
    p.layers.resize(cfg.n_layers);
    for (auto& lay : p.layers) {
        auto make_attn = [&](AttentionParams<T>& a) {
            a.wq = Matrix<T>(d, d);
            a.bq = Matrix<T>(1, d);
            a.wk = Matrix<T>(d, d);
            a.bk = Matrix<T>(1, d);
            a.wv = Matrix<T>(d, d);
            a.bv = Matrix<T>(1, d);
            a.wo = Matrix<T>(d, d);
            a.bo = Matrix<T>(1, d);
        };
        lay.ln1_gain = Matrix<T>(1, d);
        lay.ln1_bias = Matrix<T>(1, d);
        make_attn(lay.self_attn);
        lay.ln2_gain = Matrix<T>(1, d);
        lay.ln2_bias = Matrix<T>(1, d);
        make_attn(lay.cross_attn);
        lay.ln3_gain = Matrix<T>(1, d);
        lay.ln3_bias = Matrix<T>(1, d);
        lay.ffn_w1 = Matrix<T>(d, f);
        lay.ffn_b1 = Matrix<T>(1, f);
        lay.ffn_w2 = Matrix<T>(f, d);
        lay.ffn_b2 = Matrix<T>(1, d);
    }
    p.head_w = Matrix<T>(k, d);
    p.head_b = Matrix<T>(1, k);
    // pos_encoding stays empty: gradient/moment containers never need it;
    // init_parameters and checkpoint loading fill it for live models.
    return p;
}

template <typename T>
std::vector<NamedTensor<T>> ModelParameters<T>::tensors() {
    std::vector<NamedTensor<T>> out;
    detail::visit_tensors(*this, [&](std::string name, Matrix<T>& t, TensorInit init,
                                     size_t fan_in, size_t fan_out) {
        out.push_back(NamedTensor<T>{std::move(name), &t, init, fan_in, fan_out});
    });
    return out;
}

template <typename T>
std::vector<ConstNamedTensor<T>> ModelParameters<T>::tensors() const {
    std::vector<ConstNamedTensor<T>> out;
    detail::visit_tensors(*this, [&](std::string name, const Matrix<T>& t, TensorInit init,
                                     size_t fan_in, size_t fan_out) {
        out.push_back(ConstNamedTensor<T>{std::move(name), &t, init, fan_in, fan_out});
    });
    return out;
}

template <typename T>
Matrix<T> sinusoidal_encoding(size_t n_positions, size_t d) {
    if (d == 0 || d % 2 != 0)
        throw ConfigError("sinusoidal_encoding: dimension must be positive and even");
    Matrix<T> pe(n_positions, d);
    for (size_t t = 0; t < n_positions; ++t) {
        T* row = pe.row(t);
        for (size_t i = 0; 2 * i < d; ++i) {
            double w = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
            double ang = static_cast<double>(t) * w;
            row[2 * i] = static_cast<T>(std::sin(ang));
            row[2 * i + 1] = static_cast<T>(std::cos(ang));
        }
    }
    return pe;
}

template <typename T>
ModelParameters<T> init_parameters(const ModelConfig& cfg, uint64_t seed) {
    ModelParameters<T> p = ModelParameters<T>::zeros_like(cfg);
    Rng rng(substream_seed(seed, "model-init"));
    for (auto& nt : p.tensors()) {
        switch (nt.init) {
        case TensorInit::zero:
            break;
        case TensorInit::one:
            nt.tensor->fill(T(1));
            break;
        case TensorInit::query_embed:
            for (T& v : nt.tensor->buffer()) v = static_cast<T>(0.02 * rng.normal());
            break;
        case TensorInit::glorot: {
            const double a = std::sqrt(6.0 / static_cast<double>(nt.fan_in + nt.fan_out));
            for (T& v : nt.tensor->buffer()) v = static_cast<T>(rng.uniform(-a, a));
            break;
        }
        }
    }
    p.pos_encoding = sinusoidal_encoding<T>(cfg.target_frames, cfg.d_model);
    p.revision = 1;
    return p;
}

template <typename T>
Matrix<T> attention(const AttentionParams<T>& p, const Matrix<T>& queries,
                    const Matrix<T>& keys, const Matrix<T>& values, size_t n_heads,
                    AttentionTrace<T>* trace) {
    const size_t d = p.wq.rows();
    if (queries.cols() != d || keys.cols() != d || values.cols() != d)
        throw ConfigError("attention: input width does not match projection size");
    if (keys.rows() != values.rows())
        throw ConfigError("attention: keys and values must have the same length");
    if (n_heads == 0 || d % n_heads != 0)
        throw ConfigError("attention: n_heads must divide the model width");
    if (!queries.all_finite() || !keys.all_finite() || !values.all_finite())
        throw NumericError("attention: non-finite input");

    const size_t m = queries.rows(), n = keys.rows(), dh = d / n_heads;
    AttentionTrace<T> local;
    AttentionTrace<T>& tr = trace ? *trace : local;
    affine(queries, p.wq, p.bq, tr.q);
    affine(keys, p.wk, p.bk, tr.k);
    affine(values, p.wv, p.bv, tr.v);
    tr.probs = Matrix<T>(n_heads * m, n);
    tr.ctx = Matrix<T>(m, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    // One (head, query) row per iteration: scores, softmax in double, context.
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < static_cast<long long>(n_heads * m); ++r) {
        const size_t h = static_cast<size_t>(r) / m;
        const size_t i = static_cast<size_t>(r) % m;
        const size_t off = h * dh;
        const T* qi = tr.q.row(i) + off;
        T* prow = tr.probs.row(static_cast<size_t>(r));
        for (size_t j = 0; j < n; ++j) {
            const T* kj = tr.k.row(j) + off;
            double s = 0.0;
            for (size_t c = 0; c < dh; ++c)
                s += static_cast<double>(qi[c]) * static_cast<double>(kj[c]);
            prow[j] = static_cast<T>(s * scale);
        }
        double mx = static_cast<double>(prow[0]);
        for (size_t j = 1; j < n; ++j) mx = std::max(mx, static_cast<double>(prow[j]));
        double sum = 0.0;
        for (size_t j = 0; j < n; ++j) sum += std::exp(static_cast<double>(prow[j]) - mx);
        for (size_t j = 0; j < n; ++j)
            prow[j] = static_cast<T>(std::exp(static_cast<double>(prow[j]) - mx) / sum);
        T* ctxrow = tr.ctx.row(i) + off;
        for (size_t c = 0; c < dh; ++c) {
            double acc = 0.0;
            for (size_t j = 0; j < n; ++j)
                acc += static_cast<double>(prow[j]) * static_cast<double>(tr.v(j, off + c));
            ctxrow[c] = static_cast<T>(acc);
        }
    }
    Matrix<T> out;
    affine(tr.ctx, p.wo, p.bo, out);
    return out;
}

template <typename T>
ForwardResult<T> forward(const ModelParameters<T>& params,
                         const std::vector<FeatureSequence>& batch) {
    const ModelConfig& cfg = params.cfg;
    cfg.validate();
    if (batch.empty()) throw ConfigError("forward: empty batch");
    if (params.pos_encoding.rows() != cfg.target_frames ||
        params.pos_encoding.cols() != cfg.d_model)
        throw ConfigError("forward: positional table does not match the model config");

    ForwardResult<T> res;
    res.trace.cfg = cfg;
    res.trace.params_revision = params.revision;
    res.trace.samples.resize(batch.size());
    res.logits = Matrix<T>(batch.size(), cfg.n_labels);

    for (size_t b = 0; b < batch.size(); ++b) {
        const FeatureSequence& fs = batch[b];
        if (fs.n_frames() != cfg.target_frames || fs.dim() != cfg.input_dim)
            throw ConfigError("forward: sample " + std::to_string(b) + " is " +
                              std::to_string(fs.n_frames()) + "x" + std::to_string(fs.dim()) +
                              ", expected " + std::to_string(cfg.target_frames) + "x" +
                              std::to_string(cfg.input_dim));
        SampleTrace<T>& st = res.trace.samples[b];
        st.input = Matrix<T>(fs.n_frames(), fs.dim());
        for (size_t i = 0; i < fs.n_frames(); ++i)
            for (size_t j = 0; j < fs.dim(); ++j)
                st.input(i, j) = static_cast<T>(fs.frames(i, j));

        affine(st.input, params.in_proj_w, params.in_proj_b, st.memory);
        add_inplace(st.memory, params.pos_encoding);

        Matrix<T> x = params.style_queries;
        st.layers.resize(cfg.n_layers);
        for (size_t l = 0; l < cfg.n_layers; ++l) {
            const DecoderLayerParams<T>& lay = params.layers[l];
            DecoderLayerTrace<T>& lt = st.layers[l];
            lt.x_in = x;

            Matrix<T> ln1out;
            detail::layer_norm(x, lay.ln1_gain, lay.ln1_bias, ln1out, lt.ln1);
            Matrix<T> self_out =
                attention(lay.self_attn, ln1out, ln1out, ln1out, cfg.n_heads, &lt.self_attn);
            lt.x_mid = x;
            add_inplace(lt.x_mid, self_out);

            Matrix<T> ln2out;
            detail::layer_norm(lt.x_mid, lay.ln2_gain, lay.ln2_bias, ln2out, lt.ln2);
            Matrix<T> cross_out = attention(lay.cross_attn, ln2out, st.memory, st.memory,
                                            cfg.n_heads, &lt.cross_attn);
            lt.x_post = lt.x_mid;
            add_inplace(lt.x_post, cross_out);

            Matrix<T> ln3out;
            detail::layer_norm(lt.x_post, lay.ln3_gain, lay.ln3_bias, ln3out, lt.ln3);
            affine(ln3out, lay.ffn_w1, lay.ffn_b1, lt.ffn_pre);
            lt.ffn_act = Matrix<T>(lt.ffn_pre.rows(), lt.ffn_pre.cols());
            for (size_t i = 0; i < lt.ffn_pre.size(); ++i)
                lt.ffn_act.data()[i] = static_cast<T>(
                    detail::gelu_scalar(static_cast<double>(lt.ffn_pre.data()[i])));
            Matrix<T> ffn_out;
            affine(lt.ffn_act, lay.ffn_w2, lay.ffn_b2, ffn_out);
            x = lt.x_post;
            add_inplace(x, ffn_out);
        }
        st.decoded = x;
        for (size_t k = 0; k < cfg.n_labels; ++k) {
            const T* w = params.head_w.row(k);
            const T* z = st.decoded.row(k);
            double acc = static_cast<double>(params.head_b(0, k));
            for (size_t j = 0; j < cfg.d_model; ++j)
                acc += static_cast<double>(w[j]) * static_cast<double>(z[j]);
            res.logits(b, k) = static_cast<T>(acc);
        }
    }
    return res;
}

template <typename T>
Matrix<T> predict(const Matrix<T>& logits) {
    Matrix<T> p(logits.rows(), logits.cols());
    for (size_t i = 0; i < logits.size(); ++i) p.data()[i] = sigmoid(logits.data()[i]);
    return p;
}

template <typename T>
ModelParameters<T> backward(const ModelParameters<T>& params, const ForwardTrace<T>& trace,
                            const Matrix<T>& dlogits) {
    const ModelConfig& cfg = params.cfg;
    if (trace.cfg != cfg)
        throw ValidationError("backward: trace was produced under a different model config");
    if (trace.params_revision != params.revision)
        throw ValidationError("backward: stale trace (parameters changed since forward)");
    if (dlogits.rows() != trace.samples.size() || dlogits.cols() != cfg.n_labels)
        throw ValidationError("backward: dlogits must be batch x n_labels");

    ModelParameters<T> g = ModelParameters<T>::zeros_like(cfg);
    const size_t d = cfg.d_model, k = cfg.n_labels;
    Matrix<T> tmp;

    for (size_t b = 0; b < trace.samples.size(); ++b) {
        const SampleTrace<T>& st = trace.samples[b];

        // heads: logit_k = head_w[k] . decoded[k] + head_b[k]
        Matrix<T> dx(k, d);
        for (size_t q = 0; q < k; ++q) {
            const T gl = dlogits(b, q);
            const T* w = params.head_w.row(q);
            const T* z = st.decoded.row(q);
            T* dxr = dx.row(q);
            T* gw = g.head_w.row(q);
            for (size_t j = 0; j < d; ++j) {
                dxr[j] = gl * w[j];
                gw[j] += gl * z[j];
            }
            g.head_b(0, q) += gl;
        }

        Matrix<T> dmem(st.memory.rows(), d);
        for (size_t li = cfg.n_layers; li-- > 0;) {
            const DecoderLayerParams<T>& lay = params.layers[li];
            const DecoderLayerTrace<T>& lt = st.layers[li];
            DecoderLayerParams<T>& gl = g.layers[li];

            // feed-forward sublayer (dx holds the gradient at the layer output)
            Matrix<T> ln3out = detail::ln_output(lt.ln3, lay.ln3_gain, lay.ln3_bias);
            matmul_at_b(lt.ffn_act, dx, tmp);
            add_inplace(gl.ffn_w2, tmp);
            detail::acc_colsum(dx, gl.ffn_b2);
            Matrix<T> dact;
            matmul_a_bt(dx, lay.ffn_w2, dact);
            Matrix<T> dpre(dact.rows(), dact.cols());
            for (size_t i = 0; i < dpre.size(); ++i)
                dpre.data()[i] = static_cast<T>(
                    static_cast<double>(dact.data()[i]) *
                    detail::gelu_grad_scalar(static_cast<double>(lt.ffn_pre.data()[i])));
            matmul_at_b(ln3out, dpre, tmp);
            add_inplace(gl.ffn_w1, tmp);
            detail::acc_colsum(dpre, gl.ffn_b1);
            Matrix<T> dln3out;
            matmul_a_bt(dpre, lay.ffn_w1, dln3out);
            Matrix<T> dx_post =
                detail::layer_norm_backward(dln3out, lay.ln3_gain, lt.ln3, gl.ln3_gain, gl.ln3_bias);
            add_inplace(dx_post, dx); // residual

            // cross-attention sublayer
            Matrix<T> ln2out = detail::ln_output(lt.ln2, lay.ln2_gain, lay.ln2_bias);
            Matrix<T> dln2out(k, d);
            detail::attention_backward(lay.cross_attn, ln2out, st.memory, st.memory,
                                       lt.cross_attn, cfg.n_heads, dx_post, gl.cross_attn,
                                       dln2out, dmem, dmem);
            Matrix<T> dx_mid =
                detail::layer_norm_backward(dln2out, lay.ln2_gain, lt.ln2, gl.ln2_gain, gl.ln2_bias);
            add_inplace(dx_mid, dx_post);

            // query self-attention sublayer (queries, keys, values share ln1 output)
            Matrix<T> ln1out = detail::ln_output(lt.ln1, lay.ln1_gain, lay.ln1_bias);
            Matrix<T> dln1out(k, d);
            detail::attention_backward(lay.self_attn, ln1out, ln1out, ln1out, lt.self_attn,
                                       cfg.n_heads, dx_mid, gl.self_attn, dln1out, dln1out,
                                       dln1out);
            Matrix<T> dx_in =
                detail::layer_norm_backward(dln1out, lay.ln1_gain, lt.ln1, gl.ln1_gain, gl.ln1_bias);
            add_inplace(dx_in, dx_mid);
            dx = std::move(dx_in);
        }

        add_inplace(g.style_queries, dx);
        // the positional table is constant, so only the projection sees dmem
        matmul_at_b(st.input, dmem, tmp);
        add_inplace(g.in_proj_w, tmp);
        detail::acc_colsum(dmem, g.in_proj_b);
    }
    return g;
}

} // namespace smlc
