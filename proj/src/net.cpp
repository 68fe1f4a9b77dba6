#include "llmfp/net.hpp"

#include <cstring>
#include <fstream>
#include <iostream>

namespace llmfp {

namespace {

constexpr double kNormEps = 1e-12;

struct CosineGrad {
    double cos = 0.0;
    Eigen::VectorXd da, db;
};

// cos = dot(a,b) / (|a||b| + eps). The epsilon keeps degenerate signatures
// finite during training; callers that must reject zero vectors check first.
CosineGrad cosine_with_grad(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = std::max(a.norm(), kNormEps);
    const double nb = std::max(b.norm(), kNormEps);
    const double denom = na * nb + kNormEps;
    CosineGrad out;
    out.cos = a.dot(b) / denom;
    out.da = b / denom - (out.cos * nb / na / denom) * a;
    out.db = a / denom - (out.cos * na / nb / denom) * b;
    return out;
}

}  // namespace

std::string net_fingerprint(const InferenceModelParams& p) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](const void* data, std::size_t len) {
        h = fnv1a64(std::string_view(static_cast<const char*>(data), len), h);
    };
    const NetConfig& c = p.config;
    mix(&c.d_emb, sizeof c.d_emb);
    mix(&c.m, sizeof c.m);
    mix(&c.num_blocks, sizeof c.num_blocks);
    mix(&c.num_heads, sizeof c.num_heads);
    for (const auto& t : tensor_refs(const_cast<InferenceModelParams&>(p))) {
        mix(t.name.data(), t.name.size());
        mix(t.data, sizeof(double) * static_cast<std::size_t>(t.size()));
    }
    return hex64(h);
}

Prediction predict(const InferenceModelParams& params, const LabelSpace& labels,
                   const TraceSet& traces, EmbeddingProvider& provider) {
    traces.validate();
    if (!params.head) throw ModeError("predict: params carry no closed-set head");
    if (static_cast<long>(labels.size()) != params.head->Wc.rows())
        throw DimensionError("label space size", params.head->Wc.rows(),
                             static_cast<long>(labels.size()));
    std::vector<Eigen::VectorXd> feats = embed_trace_set(provider, traces);
    Prediction out;
    out.signature = forward(params, feats);
    out.distribution = classify(params, out.signature);
    int best = 0;
    for (int i = 1; i < out.distribution.size(); ++i)
        if (out.distribution[i] > out.distribution[best]) best = i;  // ties keep lowest index
    out.label = labels.labels[static_cast<std::size_t>(best)];
    out.confidence = out.distribution[best];
    return out;
}

double closed_set_loss_backward(const InferenceModelParams& params,
                                const std::vector<ClosedSetExample>& batch,
                                InferenceModelParams& grads) {
    if (!params.head) throw ModeError("closed-set loss: params carry no head");
    if (batch.empty()) return 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& ex : batch) {
        detail::ForwardCache<double> cache;
        Eigen::VectorXd v = detail::forward_cached(params, ex.pair_embeddings, false, cache);
        Eigen::VectorXd p = classify(params, v);
        const int n = static_cast<int>(p.size());
        if (ex.class_index < 0 || ex.class_index >= n)
            throw std::out_of_range("class index " + std::to_string(ex.class_index));
        loss += -std::log(std::max(p[ex.class_index], 1e-300)) * inv_n;

        Eigen::VectorXd dlogits = p * inv_n;
        dlogits[ex.class_index] -= inv_n;
        grads.head->Wc += dlogits * v.transpose();
        grads.head->bc += dlogits;
        Eigen::VectorXd dv = params.head->Wc.transpose() * dlogits;
        detail::backward_cached(params, grads, cache, dv);
    }
    return loss;
}

double contrastive_loss(const Signature& a, const Signature& b, bool is_positive, double margin) {
    if (a.size() != b.size()) throw DimensionError("signature dims", a.size(), b.size());
    if (a.norm() == 0.0 || b.norm() == 0.0)
        throw std::domain_error("contrastive_loss: cosine undefined for zero vector");
    const double cos = a.dot(b) / (a.norm() * b.norm() + kNormEps);
    const double d = 1.0 - cos;
    if (is_positive) return d * d;
    const double hinge = std::max(0.0, margin - d);
    return hinge * hinge;
}

double contrastive_loss_backward(const InferenceModelParams& params,
                                 const std::vector<SiameseExample>& batch, double margin,
                                 InferenceModelParams& grads) {
    if (batch.empty()) return 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    static bool warned_zero = false;
    for (const auto& ex : batch) {
        detail::ForwardCache<double> ca, cb;
        Eigen::VectorXd va = detail::forward_cached(params, ex.a, false, ca);
        Eigen::VectorXd vb = detail::forward_cached(params, ex.b, false, cb);
        if ((va.norm() == 0.0 || vb.norm() == 0.0) && !warned_zero) {
            std::cerr << "warning: zero signature in contrastive batch; "
                         "epsilon-guarded cosine in effect\n";
            warned_zero = true;
        }
        CosineGrad cg = cosine_with_grad(va, vb);
        const double d = 1.0 - cg.cos;
        double dl_dcos = 0.0;
        if (ex.is_positive) {
            loss += d * d * inv_n;
            dl_dcos = -2.0 * d * inv_n;
        } else {
            const double hinge = std::max(0.0, margin - d);
            loss += hinge * hinge * inv_n;
            dl_dcos = 2.0 * hinge * inv_n;
        }
        if (dl_dcos != 0.0) {
            detail::backward_cached(params, grads, ca,
                                    Eigen::VectorXd(dl_dcos * cg.da));
            detail::backward_cached(params, grads, cb,
                                    Eigen::VectorXd(dl_dcos * cg.db));
        }
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Checkpoint IO

namespace {

json config_to_json(const NetConfig& c) {
    return json{{"d_emb", c.d_emb},
                {"m", c.m},
                {"num_blocks", c.num_blocks},
                {"num_heads", c.num_heads},
                {"mlp_hidden", c.mlp_hidden},
                {"layernorm_epsilon", c.layernorm_epsilon}};
}

NetConfig config_from_json(const json& j) {
    NetConfig c;
    c.d_emb = j.at("d_emb").get<int>();
    c.m = j.at("m").get<int>();
    c.num_blocks = j.at("num_blocks").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.mlp_hidden = j.at("mlp_hidden").get<int>();
    c.layernorm_epsilon = j.at("layernorm_epsilon").get<double>();
    return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const InferenceModelParams& params,
                     const CheckpointMeta& meta) {
    const bool closed = meta.mode == "closed_set";
    if (closed != params.head.has_value())
        throw ModeError("checkpoint mode '" + meta.mode + "' inconsistent with head presence");
    if (closed && (!meta.labels || static_cast<long>(meta.labels->size()) != params.head->Wc.rows()))
        throw std::invalid_argument("closed_set checkpoint requires a matching label space");

    json tensors = json::object();
    for (const auto& t : tensor_refs(const_cast<InferenceModelParams&>(params))) {
        tensors[t.name] = json{
            {"rows", t.rows},
            {"cols", t.cols},
            {"data", base64_encode(t.data, sizeof(double) * static_cast<std::size_t>(t.size()))}};
    }
    json doc{{"format", "llmfp-checkpoint"},
             {"version", 1},
             {"mode", meta.mode},
             {"net_config", config_to_json(params.config)},
             {"embedder", json{{"name", meta.embedder_name}, {"dim", meta.embedder_dim}}},
             {"param_count", param_count(params)},
             {"fingerprint", net_fingerprint(params)},
             {"tensors", tensors}};
    if (closed) {
        json ls = json::array();
        for (const auto& l : meta.labels->labels) ls.push_back(label_to_json(l));
        doc["label_space"] = ls;
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << doc.dump(1) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw std::runtime_error("checkpoint is not valid JSON: " + path);
    if (doc.value("format", std::string()) != "llmfp-checkpoint")
        throw std::runtime_error("not a checkpoint file: " + path);
    if (doc.value("version", 0) != 1)
        throw std::runtime_error("unsupported checkpoint version in " + path);

    LoadedCheckpoint out;
    out.meta.mode = doc.at("mode").get<std::string>();
    out.meta.embedder_name = doc.at("embedder").at("name").get<std::string>();
    out.meta.embedder_dim = doc.at("embedder").at("dim").get<int>();
    NetConfig cfg = config_from_json(doc.at("net_config"));

    int num_classes = 0;
    if (out.meta.mode == "closed_set") {
        LabelSpace ls;
        for (const auto& l : doc.at("label_space")) ls.labels.push_back(label_from_json(l));
        ls.validate();
        num_classes = static_cast<int>(ls.size());
        out.meta.labels = std::move(ls);
    }

    out.params = make_zero_params<double>(cfg, num_classes);
    const json& tensors = doc.at("tensors");
    for (auto& t : tensor_refs(out.params)) {
        if (!tensors.contains(t.name))
            throw std::runtime_error("checkpoint missing tensor " + t.name);
        const json& tj = tensors.at(t.name);
        if (tj.at("rows").get<long>() != t.rows || tj.at("cols").get<long>() != t.cols)
            throw std::runtime_error("checkpoint tensor " + t.name + " has wrong shape");
        auto bytes = base64_decode(tj.at("data").get<std::string>());
        if (bytes.size() != sizeof(double) * static_cast<std::size_t>(t.size()))
            throw std::runtime_error("checkpoint tensor " + t.name + " has wrong byte size");
        std::memcpy(t.data, bytes.data(), bytes.size());
    }
    out.fingerprint = net_fingerprint(out.params);
    const std::string recorded = doc.value("fingerprint", std::string());
    if (!recorded.empty() && recorded != out.fingerprint)
        throw std::runtime_error("checkpoint fingerprint mismatch (corrupt file?): " + path);
    return out;
}

}  // namespace llmfp
