#pragma once

// Supervised closed-set training, siamese contrastive open-set training and
// evaluation metrics over generated datasets.

#include <functional>
#include <iosfwd>
#include <optional>

#include "llmfp/dataset.hpp"
#include "llmfp/net.hpp"

namespace llmfp {

enum class TrainMode { closed_set, open_set };

struct TrainConfig {
    int epochs = 100;
    int batch_size = 16;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::closed_set;
    double contrastive_margin = 0.5;   // open-set only
    double validation_fraction = 0.1;  // stratified over entries

    void validate() const {
        if (epochs <= 0 || batch_size <= 0) throw std::invalid_argument("epochs/batch_size must be positive");
        if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be positive");
        if (contrastive_margin <= 0) throw std::invalid_argument("margin must be positive");
        if (validation_fraction < 0 || validation_fraction >= 1)
            throw std::invalid_argument("validation_fraction outside [0,1)");
    }
};

/// Pair sampling for the siamese loss: for every entry, one positive (same
/// label, different entry) and one negative (different label). Entries whose
/// label has no second example are skipped for positives with a warning.
struct PairSample {
    std::size_t anchor = 0;
    std::size_t other = 0;
    bool is_positive = true;
};

std::vector<PairSample> sample_pairs(const Dataset& dataset, std::uint64_t rng_seed);

/// Per-epoch log record sink; records are single-line JSON.
using MetricsSink = std::function<void(const json&)>;

/// Cross-entropy training of the closed-set classifier. Deterministic in
/// train_config.seed. Throws on datasets with fewer than two labels.
InferenceModelParams train_closed_set(const Dataset& dataset, const NetConfig& net_config,
                                      const TrainConfig& train_config, EmbeddingProvider& provider,
                                      const MetricsSink& log = nullptr);

/// Contrastive training of the shared-weight (siamese) encoder; the returned
/// params carry no classification head.
InferenceModelParams train_open_set(const Dataset& dataset, const NetConfig& net_config,
                                    const TrainConfig& train_config, EmbeddingProvider& provider,
                                    const MetricsSink& log = nullptr);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalMetrics {
    double accuracy = 0.0;
    std::vector<double> per_class;     // indexed by class id
    std::vector<std::vector<int>> confusion;  // [true][predicted]

    json to_json(const LabelSpace& labels) const;
};

/// Closed-set evaluation using only the first k pairs of every trace set.
EvalMetrics evaluate(const InferenceModelParams& params, const LabelSpace& labels,
                     const Dataset& test_dataset, EmbeddingProvider& provider, std::size_t k);

// ---------------------------------------------------------------------------
// Shared helpers (also used by the strategy optimizer)

/// Signatures for every entry, embedding through the provider once.
std::vector<Signature> dataset_signatures(const InferenceModelParams& params,
                                          const Dataset& dataset, EmbeddingProvider& provider);

/// Stratified split of entry indices into (train, validation).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const Dataset& dataset, double validation_fraction, std::uint64_t seed);

}  // namespace llmfp
