#pragma once

// The inference network: a dense projection, a learned classification token,
// and a position-free pre-layer-norm transformer encoder. The output vector
// at the token position is the signature v; an optional dense head maps v
// into the class space for closed-set use.
//
// Everything is templated on the scalar so the same code runs in float or
// double; the library instantiates double. Reductions follow a canonical
// order (inputs are sorted lexicographically on entry), which makes forward
// and backward bit-identical under any permutation of the input traces.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "llmfp/core.hpp"
#include "llmfp/embed.hpp"

namespace llmfp {

struct NetConfig {
    int d_emb = 0;        // embedding provider dim; pair features are 2*d_emb
    int m = 128;          // feature size
    int num_blocks = 2;
    int num_heads = 2;
    int mlp_hidden = 0;   // 0 means 4*m
    double layernorm_epsilon = 1e-5;

    int hidden() const { return mlp_hidden > 0 ? mlp_hidden : 4 * m; }
    void validate() const {
        if (d_emb <= 0 || m <= 0 || num_blocks <= 0 || num_heads <= 0)
            throw std::invalid_argument("net config: sizes must be positive");
        if (m % num_heads != 0)
            throw std::invalid_argument("net config: m must be divisible by num_heads");
        if (layernorm_epsilon <= 0)
            throw std::invalid_argument("net config: layernorm_epsilon must be positive");
    }
    bool operator==(const NetConfig&) const = default;
};

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Signature = Eigen::VectorXd;

template <typename Scalar>
struct BlockParamsT {
    MatX<Scalar> Wq, Wk, Wv, Wo;          // m x m
    VecX<Scalar> bq, bk, bv, bo;          // m
    MatX<Scalar> W1;                      // hidden x m
    VecX<Scalar> b1;                      // hidden
    MatX<Scalar> W2;                      // m x hidden
    VecX<Scalar> b2;                      // m
    VecX<Scalar> ln1_gain, ln1_bias;      // m
    VecX<Scalar> ln2_gain, ln2_bias;      // m
};

template <typename Scalar>
struct HeadParamsT {
    MatX<Scalar> Wc;                      // n x m
    VecX<Scalar> bc;                      // n
};

template <typename Scalar>
struct NetParamsT {
    NetConfig config;
    MatX<Scalar> Wp;                      // m x 2*d_emb
    VecX<Scalar> bp;                      // m
    VecX<Scalar> c_token;                 // m
    std::vector<BlockParamsT<Scalar>> blocks;
    std::optional<HeadParamsT<Scalar>> head;

    int num_classes() const { return head ? static_cast<int>(head->Wc.rows()) : 0; }
};

using InferenceModelParams = NetParamsT<double>;

// ---------------------------------------------------------------------------
// Construction

template <typename Scalar>
NetParamsT<Scalar> make_zero_params(const NetConfig& cfg, int num_classes = 0) {
    cfg.validate();
    NetParamsT<Scalar> p;
    p.config = cfg;
    const int m = cfg.m, h = cfg.hidden(), d2 = 2 * cfg.d_emb;
    p.Wp = MatX<Scalar>::Zero(m, d2);
    p.bp = VecX<Scalar>::Zero(m);
    p.c_token = VecX<Scalar>::Zero(m);
    p.blocks.resize(static_cast<std::size_t>(cfg.num_blocks));
    for (auto& b : p.blocks) {
        b.Wq = b.Wk = b.Wv = b.Wo = MatX<Scalar>::Zero(m, m);
        b.bq = b.bk = b.bv = b.bo = VecX<Scalar>::Zero(m);
        b.W1 = MatX<Scalar>::Zero(h, m);
        b.b1 = VecX<Scalar>::Zero(h);
        b.W2 = MatX<Scalar>::Zero(m, h);
        b.b2 = VecX<Scalar>::Zero(m);
        b.ln1_gain = b.ln2_gain = VecX<Scalar>::Ones(m);
        b.ln1_bias = b.ln2_bias = VecX<Scalar>::Zero(m);
    }
    if (num_classes > 0)
        p.head = HeadParamsT<Scalar>{MatX<Scalar>::Zero(num_classes, m),
                                     VecX<Scalar>::Zero(num_classes)};
    return p;
}

/// Uniform fan-in scaled init for weights, zero biases, unit layer-norm
/// gains, small Gaussian classification token.
template <typename Scalar>
NetParamsT<Scalar> make_random_params(const NetConfig& cfg, std::uint64_t seed,
                                      int num_classes = 0) {
    NetParamsT<Scalar> p = make_zero_params<Scalar>(cfg, num_classes);
    Rng rng(seed ^ 0x11a7);
    auto fill = [&](MatX<Scalar>& w) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
        for (long c = 0; c < w.cols(); ++c)
            for (long r = 0; r < w.rows(); ++r)
                w(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
    };
    fill(p.Wp);
    for (auto& b : p.blocks) {
        fill(b.Wq); fill(b.Wk); fill(b.Wv); fill(b.Wo);
        fill(b.W1); fill(b.W2);
    }
    if (p.head) fill(p.head->Wc);
    for (long i = 0; i < p.c_token.size(); ++i)
        p.c_token[i] = static_cast<Scalar>(rng.normal(0.0, 0.02));
    return p;
}

// ---------------------------------------------------------------------------
// Named tensor access, used by serialization, the optimizer and the gradient
// checker. Order is fixed and part of the checkpoint format.

template <typename Scalar>
struct TensorRef {
    std::string name;
    Scalar* data;
    long rows, cols;
    long size() const { return rows * cols; }
};

template <typename Scalar>
std::vector<TensorRef<Scalar>> tensor_refs(NetParamsT<Scalar>& p) {
    std::vector<TensorRef<Scalar>> out;
    auto add = [&](const std::string& name, auto& t) {
        out.push_back({name, t.data(), t.rows(), t.cols()});
    };
    add("projection.weight", p.Wp);
    add("projection.bias", p.bp);
    add("c_token", p.c_token);
    for (std::size_t i = 0; i < p.blocks.size(); ++i) {
        auto& b = p.blocks[i];
        const std::string pre = "block" + std::to_string(i) + ".";
        add(pre + "attn.Wq", b.Wq); add(pre + "attn.bq", b.bq);
        add(pre + "attn.Wk", b.Wk); add(pre + "attn.bk", b.bk);
        add(pre + "attn.Wv", b.Wv); add(pre + "attn.bv", b.bv);
        add(pre + "attn.Wo", b.Wo); add(pre + "attn.bo", b.bo);
        add(pre + "mlp.W1", b.W1); add(pre + "mlp.b1", b.b1);
        add(pre + "mlp.W2", b.W2); add(pre + "mlp.b2", b.b2);
        add(pre + "ln1.gain", b.ln1_gain); add(pre + "ln1.bias", b.ln1_bias);
        add(pre + "ln2.gain", b.ln2_gain); add(pre + "ln2.bias", b.ln2_bias);
    }
    if (p.head) {
        add("head.weight", p.head->Wc);
        add("head.bias", p.head->bc);
    }
    return out;
}

template <typename Scalar>
long param_count(const NetParamsT<Scalar>& p) {
    long n = 0;
    for (const auto& t : tensor_refs(const_cast<NetParamsT<Scalar>&>(p))) n += t.size();
    return n;
}

/// Digest over the raw tensor bytes in tensor_refs order; ties checkpoints
/// to the template databases they produced.
std::string net_fingerprint(const InferenceModelParams& p);

// ---------------------------------------------------------------------------
// Forward

namespace detail {

template <typename Scalar>
Scalar gelu(Scalar x) {
    return Scalar(0.5) * x * (Scalar(1) + std::erf(x * Scalar(M_SQRT1_2)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
    const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x * Scalar(M_SQRT1_2)));
    const Scalar pdf = std::exp(Scalar(-0.5) * x * x) * Scalar(0.3989422804014326779399461);
    return cdf + x * pdf;
}

// Canonical input order: indices sorted by lexicographic comparison of the
// vectors' entries. Identical vectors compare equal, so which copy lands
// where is immaterial.
template <typename Scalar>
std::vector<std::size_t> canonical_order(const std::vector<VecX<Scalar>>& xs) {
    std::vector<std::size_t> idx(xs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(xs[a].data(), xs[a].data() + xs[a].size(),
                                            xs[b].data(), xs[b].data() + xs[b].size());
    });
    return idx;
}

template <typename Scalar>
struct LayerNormCache {
    MatX<Scalar> xhat;          // t x m
    VecX<Scalar> inv_std;       // t
};

// Row-wise layer norm with biased variance.
template <typename Scalar>
MatX<Scalar> layernorm(const MatX<Scalar>& x, const VecX<Scalar>& gain, const VecX<Scalar>& bias,
                       double eps, LayerNormCache<Scalar>& cache) {
    const long t = x.rows(), m = x.cols();
    cache.xhat.resize(t, m);
    cache.inv_std.resize(t);
    MatX<Scalar> y(t, m);
    for (long r = 0; r < t; ++r) {
        const Scalar mu = x.row(r).mean();
        const Scalar var = (x.row(r).array() - mu).square().sum() / Scalar(m);
        const Scalar inv = Scalar(1) / std::sqrt(var + Scalar(eps));
        cache.inv_std[r] = inv;
        cache.xhat.row(r) = (x.row(r).array() - mu) * inv;
        y.row(r) = cache.xhat.row(r).cwiseProduct(gain.transpose()) + bias.transpose();
    }
    return y;
}

template <typename Scalar>
void layernorm_backward(const MatX<Scalar>& dy, const VecX<Scalar>& gain,
                        const LayerNormCache<Scalar>& cache, MatX<Scalar>& dx,
                        VecX<Scalar>& dgain, VecX<Scalar>& dbias) {
    const long t = dy.rows(), m = dy.cols();
    dx.resize(t, m);
    for (long r = 0; r < t; ++r) {
        dgain += dy.row(r).cwiseProduct(cache.xhat.row(r)).transpose();
        dbias += dy.row(r).transpose();
        Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dxhat =
            dy.row(r).cwiseProduct(gain.transpose());
        const Scalar sum_dxhat = dxhat.sum();
        const Scalar sum_dxhat_xhat = dxhat.cwiseProduct(cache.xhat.row(r)).sum();
        dx.row(r) = ((cache.inv_std[r] / Scalar(m)) *
                     (Scalar(m) * dxhat.array() - sum_dxhat -
                      cache.xhat.row(r).array() * sum_dxhat_xhat))
                        .matrix();
    }
}

template <typename Scalar>
struct BlockCache {
    MatX<Scalar> x_in;                   // t x m
    LayerNormCache<Scalar> ln1, ln2;
    MatX<Scalar> h1;                     // ln1 output
    MatX<Scalar> q, k, v;                // t x m
    std::vector<MatX<Scalar>> attn;      // per head, t x t softmax rows
    MatX<Scalar> z;                      // t x m, concatenated head outputs
    MatX<Scalar> x_mid;                  // after attention residual
    MatX<Scalar> h2;                     // ln2 output
    MatX<Scalar> u;                      // t x hidden, pre-activation
    MatX<Scalar> g;                      // gelu(u)
};

template <typename Scalar>
struct ForwardCache {
    std::vector<std::size_t> order;              // canonical input order
    std::vector<VecX<Scalar>> inputs;            // sorted raw inputs (2*d_emb), empty if projected
    MatX<Scalar> x0;                             // token + projected features, t x m
    std::vector<BlockCache<Scalar>> blocks;
    MatX<Scalar> x_final;
};

template <typename Scalar>
MatX<Scalar> block_forward(const BlockParamsT<Scalar>& b, const NetConfig& cfg,
                           const MatX<Scalar>& x, BlockCache<Scalar>& cache) {
    const long t = x.rows();
    const int heads = cfg.num_heads;
    const long dh = cfg.m / heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

    cache.x_in = x;
    cache.h1 = layernorm(x, b.ln1_gain, b.ln1_bias, cfg.layernorm_epsilon, cache.ln1);

    cache.q = (cache.h1 * b.Wq.transpose()).rowwise() + b.bq.transpose();
    cache.k = (cache.h1 * b.Wk.transpose()).rowwise() + b.bk.transpose();
    cache.v = (cache.h1 * b.Wv.transpose()).rowwise() + b.bv.transpose();

    cache.attn.assign(static_cast<std::size_t>(heads), MatX<Scalar>());
    cache.z.resize(t, cfg.m);
    for (int h = 0; h < heads; ++h) {
        auto qh = cache.q.middleCols(h * dh, dh);
        auto kh = cache.k.middleCols(h * dh, dh);
        auto vh = cache.v.middleCols(h * dh, dh);
        MatX<Scalar> scores = qh * kh.transpose() * scale;
        MatX<Scalar>& p = cache.attn[static_cast<std::size_t>(h)];
        p.resize(t, t);
        for (long r = 0; r < t; ++r) {
            const Scalar mx = scores.row(r).maxCoeff();
            p.row(r) = (scores.row(r).array() - mx).exp().matrix();
            p.row(r) /= p.row(r).sum();
        }
        cache.z.middleCols(h * dh, dh) = p * vh;
    }
    MatX<Scalar> attn_out = (cache.z * b.Wo.transpose()).rowwise() + b.bo.transpose();
    cache.x_mid = x + attn_out;

    cache.h2 = layernorm(cache.x_mid, b.ln2_gain, b.ln2_bias, cfg.layernorm_epsilon, cache.ln2);
    cache.u = (cache.h2 * b.W1.transpose()).rowwise() + b.b1.transpose();
    cache.g = cache.u.unaryExpr([](Scalar s) { return gelu(s); });
    MatX<Scalar> mlp_out = (cache.g * b.W2.transpose()).rowwise() + b.b2.transpose();
    return cache.x_mid + mlp_out;
}

// dx accumulates the gradient w.r.t. the block input; parameter gradients go
// into gb.
template <typename Scalar>
MatX<Scalar> block_backward(const BlockParamsT<Scalar>& b, BlockParamsT<Scalar>& gb,
                            const NetConfig& cfg, const BlockCache<Scalar>& cache,
                            const MatX<Scalar>& dout) {
    const long t = dout.rows();
    const int heads = cfg.num_heads;
    const long dh = cfg.m / heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

    // MLP branch
    MatX<Scalar> dg = dout * b.W2;
    gb.W2 += dout.transpose() * cache.g;
    gb.b2 += dout.colwise().sum().transpose();
    MatX<Scalar> du =
        dg.binaryExpr(cache.u, [](Scalar dgi, Scalar ui) { return dgi * gelu_grad(ui); });
    MatX<Scalar> dh2 = du * b.W1;
    gb.W1 += du.transpose() * cache.h2;
    gb.b1 += du.colwise().sum().transpose();

    MatX<Scalar> dx_mid;
    layernorm_backward(dh2, b.ln2_gain, cache.ln2, dx_mid, gb.ln2_gain, gb.ln2_bias);
    dx_mid += dout;  // residual

    // Attention branch
    MatX<Scalar> dattn_out = dx_mid;
    MatX<Scalar> dz = dattn_out * b.Wo;
    gb.Wo += dattn_out.transpose() * cache.z;
    gb.bo += dattn_out.colwise().sum().transpose();

    MatX<Scalar> dq = MatX<Scalar>::Zero(t, cfg.m);
    MatX<Scalar> dk = MatX<Scalar>::Zero(t, cfg.m);
    MatX<Scalar> dv = MatX<Scalar>::Zero(t, cfg.m);
    for (int h = 0; h < heads; ++h) {
        const MatX<Scalar>& p = cache.attn[static_cast<std::size_t>(h)];
        auto vh = cache.v.middleCols(h * dh, dh);
        auto qh = cache.q.middleCols(h * dh, dh);
        auto kh = cache.k.middleCols(h * dh, dh);
        MatX<Scalar> dzh = dz.middleCols(h * dh, dh);
        MatX<Scalar> dp = dzh * vh.transpose();
        dv.middleCols(h * dh, dh) = p.transpose() * dzh;
        MatX<Scalar> ds(t, t);
        for (long r = 0; r < t; ++r) {
            const Scalar dot = dp.row(r).cwiseProduct(p.row(r)).sum();
            ds.row(r) = p.row(r).cwiseProduct((dp.row(r).array() - dot).matrix());
        }
        dq.middleCols(h * dh, dh) = ds * kh * scale;
        dk.middleCols(h * dh, dh) = ds.transpose() * qh * scale;
    }
    MatX<Scalar> dh1 = dq * b.Wq + dk * b.Wk + dv * b.Wv;
    gb.Wq += dq.transpose() * cache.h1;
    gb.bq += dq.colwise().sum().transpose();
    gb.Wk += dk.transpose() * cache.h1;
    gb.bk += dk.colwise().sum().transpose();
    gb.Wv += dv.transpose() * cache.h1;
    gb.bv += dv.colwise().sum().transpose();

    MatX<Scalar> dx_in;
    layernorm_backward(dh1, b.ln1_gain, cache.ln1, dx_in, gb.ln1_gain, gb.ln1_bias);
    dx_in += dx_mid;  // residual
    return dx_in;
}

// Runs the encoder over 1..k feature vectors. When `projected` is false the
// inputs are raw pair embeddings and the projection is applied.
template <typename Scalar>
VecX<Scalar> forward_cached(const NetParamsT<Scalar>& params,
                            const std::vector<VecX<Scalar>>& features, bool projected,
                            ForwardCache<Scalar>& cache) {
    if (features.empty()) throw std::invalid_argument("forward: no input features");
    const NetConfig& cfg = params.config;
    const long expected = projected ? cfg.m : 2L * cfg.d_emb;
    for (const auto& f : features)
        if (f.size() != expected)
            throw DimensionError("forward input dim", expected, f.size());

    cache.order = canonical_order(features);
    const long k = static_cast<long>(features.size());
    cache.x0.resize(k + 1, cfg.m);
    cache.x0.row(0) = params.c_token.transpose();
    if (projected) {
        cache.inputs.clear();
        for (long i = 0; i < k; ++i)
            cache.x0.row(i + 1) = features[cache.order[static_cast<std::size_t>(i)]].transpose();
    } else {
        cache.inputs.resize(static_cast<std::size_t>(k));
        for (long i = 0; i < k; ++i) {
            const auto& e = features[cache.order[static_cast<std::size_t>(i)]];
            cache.inputs[static_cast<std::size_t>(i)] = e;
            cache.x0.row(i + 1) = (params.Wp * e + params.bp).transpose();
        }
    }

    cache.blocks.resize(params.blocks.size());
    MatX<Scalar> x = cache.x0;
    for (std::size_t i = 0; i < params.blocks.size(); ++i)
        x = block_forward(params.blocks[i], cfg, x, cache.blocks[i]);
    cache.x_final = x;
    return x.row(0).transpose();
}

// Backpropagates d(loss)/d(signature) through the encoder, accumulating
// parameter gradients into `grads`.
template <typename Scalar>
void backward_cached(const NetParamsT<Scalar>& params, NetParamsT<Scalar>& grads,
                     const ForwardCache<Scalar>& cache, const VecX<Scalar>& dsig) {
    const long t = cache.x0.rows();
    MatX<Scalar> dx = MatX<Scalar>::Zero(t, params.config.m);
    dx.row(0) = dsig.transpose();
    for (std::size_t i = params.blocks.size(); i-- > 0;)
        dx = block_backward(params.blocks[i], grads.blocks[i], params.config, cache.blocks[i], dx);
    grads.c_token += dx.row(0).transpose();
    if (!cache.inputs.empty()) {
        for (long i = 1; i < t; ++i) {
            grads.Wp += dx.row(i).transpose() * cache.inputs[static_cast<std::size_t>(i - 1)].transpose();
            grads.bp += dx.row(i).transpose();
        }
    }
}

}  // namespace detail

/// Encoder over raw pair embeddings (projection applied).
template <typename Scalar>
VecX<Scalar> forward(const NetParamsT<Scalar>& params, const std::vector<VecX<Scalar>>& pair_embeddings) {
    detail::ForwardCache<Scalar> cache;
    return detail::forward_cached(params, pair_embeddings, /*projected=*/false, cache);
}

/// Encoder over already-projected m-dim features (projection skipped).
template <typename Scalar>
VecX<Scalar> forward_projected(const NetParamsT<Scalar>& params, const std::vector<VecX<Scalar>>& features) {
    detail::ForwardCache<Scalar> cache;
    return detail::forward_cached(params, features, /*projected=*/true, cache);
}

// ---------------------------------------------------------------------------
// Closed-set head

/// softmax(Wc v + bc). Requires the head; throws ModeError otherwise.
template <typename Scalar>
VecX<Scalar> classify(const NetParamsT<Scalar>& params, const VecX<Scalar>& sig) {
    if (!params.head) throw ModeError("classify: params carry no closed-set head");
    if (sig.size() != params.config.m)
        throw DimensionError("signature dim", params.config.m, sig.size());
    VecX<Scalar> logits = params.head->Wc * sig + params.head->bc;
    const Scalar mx = logits.maxCoeff();
    VecX<Scalar> p = (logits.array() - mx).exp().matrix();
    p /= p.sum();
    return p;
}

struct Prediction {
    ModelLabel label;
    double confidence = 0.0;
    Eigen::VectorXd distribution;
    Signature signature;
};

/// Embed the traces, run the encoder, argmax the head. Ties break to the
/// lowest class index.
Prediction predict(const InferenceModelParams& params, const LabelSpace& labels,
                   const TraceSet& traces, EmbeddingProvider& provider);

// ---------------------------------------------------------------------------
// Losses with analytic gradients. Both return the batch-mean loss and
// accumulate gradients for every parameter (including c_token) into an
// initially zeroed gradient structure.

struct ClosedSetExample {
    std::vector<Eigen::VectorXd> pair_embeddings;
    int class_index = 0;
};

struct SiameseExample {
    std::vector<Eigen::VectorXd> a;
    std::vector<Eigen::VectorXd> b;
    bool is_positive = true;
};

double closed_set_loss_backward(const InferenceModelParams& params,
                                const std::vector<ClosedSetExample>& batch,
                                InferenceModelParams& grads);

/// Cosine-distance contrastive loss: positives contribute d^2, negatives
/// max(0, margin - d)^2 with d = 1 - cos(v_a, v_b).
double contrastive_loss(const Signature& a, const Signature& b, bool is_positive, double margin);

double contrastive_loss_backward(const InferenceModelParams& params,
                                 const std::vector<SiameseExample>& batch, double margin,
                                 InferenceModelParams& grads);

// ---------------------------------------------------------------------------
// Checkpoints: a single JSON document with a config header and named base64
// tensors (little-endian doubles), in tensor_refs order.

struct CheckpointMeta {
    std::string mode;                 // "closed_set" | "open_set"
    std::optional<LabelSpace> labels; // present iff closed_set
    std::string embedder_name;
    int embedder_dim = 0;
};

void save_checkpoint(const std::string& path, const InferenceModelParams& params,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
    InferenceModelParams params;
    CheckpointMeta meta;
    std::string fingerprint;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace llmfp
