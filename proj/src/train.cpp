#include "llmfp/train.hpp"

#include <algorithm>
#include <iostream>
#include <unordered_map>

namespace llmfp {

namespace {

// Adam with bias correction. State mirrors the parameter structure.
class AdamOptimizer {
public:
    AdamOptimizer(const InferenceModelParams& params, double lr)
        : lr_(lr), m_(grads_like(params)), v_(grads_like(params)) {}

    static InferenceModelParams grads_like(const InferenceModelParams& p) {
        InferenceModelParams g = p;
        for (auto& t : tensor_refs(g)) std::fill(t.data, t.data + t.size(), 0.0);
        return g;
    }

    void step(InferenceModelParams& params, InferenceModelParams& grads) {
        ++t_;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double bc1 = 1.0 - std::pow(b1, t_);
        const double bc2 = 1.0 - std::pow(b2, t_);
        auto pr = tensor_refs(params);
        auto gr = tensor_refs(grads);
        auto mr = tensor_refs(m_);
        auto vr = tensor_refs(v_);
        for (std::size_t i = 0; i < pr.size(); ++i) {
            double* p = pr[i].data;
            double* g = gr[i].data;
            double* m = mr[i].data;
            double* v = vr[i].data;
            const long n = pr[i].size();
            for (long j = 0; j < n; ++j) {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                p[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
                g[j] = 0.0;
            }
        }
    }

private:
    double lr_;
    int t_ = 0;
    InferenceModelParams m_, v_;
};

std::vector<std::vector<Eigen::VectorXd>> embed_entries(const Dataset& dataset,
                                                        EmbeddingProvider& provider) {
    std::vector<std::vector<Eigen::VectorXd>> out;
    out.reserve(dataset.entries.size());
    for (const auto& e : dataset.entries) out.push_back(embed_trace_set(provider, e.traces));
    return out;
}

}  // namespace

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const Dataset& dataset, double validation_fraction, std::uint64_t seed) {
    std::unordered_map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < dataset.entries.size(); ++i)
        by_label[dataset.entries[i].label.display()].push_back(i);

    // iterate labels in label-space order for determinism
    std::vector<std::size_t> train, val;
    Rng rng(seed ^ 0x7a1ull);
    for (const auto& label : dataset.label_space.labels) {
        auto it = by_label.find(label.display());
        if (it == by_label.end()) continue;
        std::vector<std::size_t>& idx = it->second;
        rng.shuffle(idx);
        std::size_t n_val = static_cast<std::size_t>(
            std::floor(validation_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_val ? val : train).push_back(idx[i]);
    }
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {train, val};
}

std::vector<PairSample> sample_pairs(const Dataset& dataset, std::uint64_t rng_seed) {
    std::unordered_map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < dataset.entries.size(); ++i)
        by_label[dataset.entries[i].label.display()].push_back(i);

    static bool warned = false;
    Rng rng(rng_seed ^ 0x9a1e5ull);
    std::vector<PairSample> out;
    for (std::size_t i = 0; i < dataset.entries.size(); ++i) {
        const std::string label = dataset.entries[i].label.display();
        const auto& same = by_label[label];
        if (same.size() >= 2) {
            std::size_t j;
            do {
                j = same[rng.uniform_int(same.size())];
            } while (j == i);
            out.push_back({i, j, true});
        } else if (!warned) {
            std::cerr << "warning: label " << label << " has a single entry; skipped for positives\n";
            warned = true;
        }
        if (same.size() < dataset.entries.size()) {
            std::size_t j;
            do {
                j = rng.uniform_int(dataset.entries.size());
            } while (dataset.entries[j].label.display() == label);
            out.push_back({i, j, false});
        }
    }
    return out;
}

InferenceModelParams train_closed_set(const Dataset& dataset, const NetConfig& net_config,
                                      const TrainConfig& train_config, EmbeddingProvider& provider,
                                      const MetricsSink& log) {
    train_config.validate();
    dataset.validate();
    if (dataset.label_space.size() < 2)
        throw std::invalid_argument("closed-set training needs at least two labels");
    NetConfig cfg = net_config;
    cfg.d_emb = provider.dim();
    cfg.validate();

    const auto features = embed_entries(dataset, provider);
    auto [train_idx, val_idx] = stratified_split(dataset, train_config.validation_fraction,
                                                 train_config.seed);

    const int n = static_cast<int>(dataset.label_space.size());
    InferenceModelParams params = make_random_params<double>(cfg, train_config.seed, n);
    InferenceModelParams grads = AdamOptimizer::grads_like(params);
    AdamOptimizer adam(params, train_config.learning_rate);
    Rng shuffle_rng(train_config.seed ^ 0x7fa170ull);

    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        std::vector<std::size_t> order = train_idx;
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(train_config.batch_size)) {
            std::vector<ClosedSetExample> batch;
            const std::size_t end = std::min(order.size(),
                                             start + static_cast<std::size_t>(train_config.batch_size));
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t e = order[i];
                batch.push_back({features[e],
                                 dataset.label_space.index_of(dataset.entries[e].label)});
            }
            epoch_loss += closed_set_loss_backward(params, batch, grads);
            adam.step(params, grads);
            ++batches;
        }
        epoch_loss /= std::max<std::size_t>(1, batches);

        if (log) {
            json rec{{"epoch", epoch}, {"loss", epoch_loss}};
            if (!val_idx.empty()) {
                std::size_t correct = 0;
                for (std::size_t e : val_idx) {
                    Signature sig = forward(params, features[e]);
                    Eigen::VectorXd p = classify(params, sig);
                    int best = 0;
                    for (int i = 1; i < p.size(); ++i)
                        if (p[i] > p[best]) best = i;
                    if (best == dataset.label_space.index_of(dataset.entries[e].label)) ++correct;
                }
                rec["val_accuracy"] = static_cast<double>(correct) / val_idx.size();
            }
            log(rec);
        }
    }
    return params;
}

InferenceModelParams train_open_set(const Dataset& dataset, const NetConfig& net_config,
                                    const TrainConfig& train_config, EmbeddingProvider& provider,
                                    const MetricsSink& log) {
    train_config.validate();
    dataset.validate();
    if (dataset.label_space.size() < 2)
        throw std::invalid_argument("open-set training needs at least two labels");
    NetConfig cfg = net_config;
    cfg.d_emb = provider.dim();
    cfg.validate();

    const auto features = embed_entries(dataset, provider);
    auto [train_idx, val_idx] = stratified_split(dataset, train_config.validation_fraction,
                                                 train_config.seed);
    // pair sampling runs over the training subset only
    Dataset train_view;
    train_view.label_space = dataset.label_space;
    for (std::size_t i : train_idx) train_view.entries.push_back(dataset.entries[i]);

    InferenceModelParams params = make_random_params<double>(cfg, train_config.seed, 0);
    InferenceModelParams grads = AdamOptimizer::grads_like(params);
    AdamOptimizer adam(params, train_config.learning_rate);
    Rng shuffle_rng(train_config.seed ^ 0x51a3e5eull);

    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        std::vector<PairSample> pairs =
            sample_pairs(train_view, train_config.seed + static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(pairs);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < pairs.size();
             start += static_cast<std::size_t>(train_config.batch_size)) {
            std::vector<SiameseExample> batch;
            const std::size_t end = std::min(pairs.size(),
                                             start + static_cast<std::size_t>(train_config.batch_size));
            for (std::size_t i = start; i < end; ++i) {
                const PairSample& ps = pairs[i];
                batch.push_back({features[train_idx[ps.anchor]], features[train_idx[ps.other]],
                                 ps.is_positive});
            }
            epoch_loss += contrastive_loss_backward(params, batch, train_config.contrastive_margin,
                                                    grads);
            adam.step(params, grads);
            ++batches;
        }
        epoch_loss /= std::max<std::size_t>(1, batches);
        if (log) log(json{{"epoch", epoch}, {"loss", epoch_loss}});
    }
    return params;
}

EvalMetrics evaluate(const InferenceModelParams& params, const LabelSpace& labels,
                     const Dataset& test_dataset, EmbeddingProvider& provider, std::size_t k) {
    const int n = static_cast<int>(labels.size());
    EvalMetrics m;
    m.confusion.assign(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), 0));
    std::size_t correct = 0;
    for (const auto& e : test_dataset.entries) {
        const int truth = labels.index_of(e.label);
        if (truth < 0) throw std::invalid_argument("test entry label not in label space");
        Prediction pred = predict(params, labels, e.traces.prefix(k), provider);
        const int got = labels.index_of(pred.label);
        m.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(got)]++;
        if (got == truth) ++correct;
    }
    m.accuracy = test_dataset.entries.empty()
                     ? 0.0
                     : static_cast<double>(correct) / static_cast<double>(test_dataset.size());
    m.per_class.resize(static_cast<std::size_t>(n), 0.0);
    for (int c = 0; c < n; ++c) {
        int row_total = 0;
        for (int j = 0; j < n; ++j) row_total += m.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
        m.per_class[static_cast<std::size_t>(c)] =
            row_total == 0 ? 0.0
                           : static_cast<double>(m.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]) / row_total;
    }
    return m;
}

json EvalMetrics::to_json(const LabelSpace& labels) const {
    json per = json::object();
    for (std::size_t i = 0; i < per_class.size(); ++i)
        per[labels.labels[i].display()] = per_class[i];
    return json{{"accuracy", accuracy}, {"per_class_accuracy", per}, {"confusion_matrix", confusion}};
}

std::vector<Signature> dataset_signatures(const InferenceModelParams& params,
                                          const Dataset& dataset, EmbeddingProvider& provider) {
    std::vector<Signature> out;
    out.reserve(dataset.entries.size());
    for (const auto& e : dataset.entries)
        out.push_back(forward(params, embed_trace_set(provider, e.traces)));
    return out;
}

}  // namespace llmfp
