#pragma once

// The probe catalog (default 8-query strategy plus a ~50-entry candidate
// pool), execution-trigger wrapping, empirical probe-quality estimators and
// the query-subset optimizer.

#include <functional>

#include "llmfp/embed.hpp"
#include "llmfp/simenv.hpp"
#include "llmfp/train.hpp"

namespace llmfp {

/// The bundled default strategy: eight probes in decreasing individual
/// effectiveness, the first one trigger-wrapped.
const QueryStrategy& default_strategy();

struct QueryPool {
    std::vector<Query> candidates;  // grouped by family, ~10 per family

    std::size_t size() const { return candidates.size(); }
    void validate() const;  // all five families present, ids unique
    const Query* find(const std::string& id) const;
};

/// ~50 candidate probes, ten per family, containing the default strategy.
const QueryPool& default_query_pool();

void save_query_pool(const std::string& path, const QueryPool& pool);
QueryPool load_query_pool(const std::string& path);

/// Embeds the query text into the prompt-injection execution trigger
/// template; id gains a "_trigger" suffix, family is preserved. Throws if
/// the query is already wrapped.
Query wrap_with_trigger(const Query& q);

/// Maps incoming probe text back to a catalog query (exact match against the
/// default strategy, then the default pool); unknown text becomes an ad-hoc
/// malformed-family query with a digest id. Used by mock servers.
Query identify_query(const std::string& text);

// ---------------------------------------------------------------------------
// Probe-quality estimators

/// Cosine distance over provider embeddings of responses: d in [0, 2],
/// d(x, x) = 0, symmetric.
struct DistanceMetric {
    enum class Kind { cosine_embedding_distance };
    Kind kind = Kind::cosine_embedding_distance;
    EmbeddingProvider* provider = nullptr;

    double distance(const std::string& x, const std::string& y) const;
};

/// Monte-Carlo estimate of the expected response distance between distinct
/// models answering q; configurations are drawn from the given list and
/// noise is resampled per draw. The per-pair RNG is keyed on the unordered
/// label pair, so the estimate is exactly symmetric in the model list order.
/// Deterministic in seed.
double inter_model_discrepancy(const Query& q, const std::vector<SyntheticModel>& models,
                               const std::vector<PromptingConfiguration>& configs,
                               const DistanceMetric& metric, std::size_t samples_per_pair,
                               std::uint64_t seed);

/// Monte-Carlo estimate of the expected response distance of one model
/// answering q under two distinct configurations from the list (lower means
/// more consistent). Needs at least two configurations. Deterministic in
/// seed.
double intra_model_consistency(const Query& q, const SyntheticModel& model,
                               const std::vector<PromptingConfiguration>& configs,
                               const DistanceMetric& metric, std::size_t samples,
                               std::uint64_t seed);

/// Convenience draw of n configurations from a pool.
std::vector<PromptingConfiguration> sample_configs(const ConfigPool& pool, std::size_t n,
                                                   std::uint64_t seed);

// ---------------------------------------------------------------------------
// Query-subset optimizer: train a single-probe model per candidate, keep the
// top_k, train one model on those, then score every non-empty subset by
// masking input traces and keep the smallest subset with the best accuracy
// (ties: smallest size, then lexicographic ids).

struct OptimizeOptions {
    std::size_t top_k = 12;
    double train_frac = 0.8;
    NetConfig net_config;
    TrainConfig train_config;
    std::uint64_t seed = 0;
};

struct OptimizeResult {
    QueryStrategy strategy;  // ordered by decreasing single-probe accuracy
    std::vector<std::pair<std::string, double>> single_query_accuracy;  // id -> accuracy
    std::vector<std::string> shortlist;  // the top_k ids
    std::size_t subsets_evaluated = 0;
    double best_accuracy = 0.0;
};

using DatasetFactory = std::function<Dataset(const QueryStrategy&)>;

OptimizeResult optimize_query_strategy(const QueryPool& pool, const DatasetFactory& factory,
                                       EmbeddingProvider& provider, const OptimizeOptions& options);

}  // namespace llmfp
