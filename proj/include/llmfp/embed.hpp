#pragma once

// Text -> fixed-size vectors through a pluggable embedding provider, plus the
// (query, response) pair concatenation fed to the inference net.
//
// Three providers: a hash stub (tests), a local hashed-ngram model (default
// for desk-scale runs) and a remote JSON-over-HTTP adapter. All providers
// must be deterministic: embed of equal strings is equal.

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "llmfp/core.hpp"

namespace llmfp {

using Vec = Eigen::VectorXd;

/// Concatenated [emb(query_text); emb(response)], length 2*dim.
using PairEmbedding = Eigen::VectorXd;

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual const std::string& name() const = 0;
    virtual int dim() const = 0;
    virtual std::size_t max_input_chars() const { return 4000; }

    /// Embed already-truncated text. Called via embed_text().
    virtual Vec embed(const std::string& text) = 0;
};

/// Truncates to the provider's max_input_chars at a code-point boundary,
/// then embeds. Empty text maps to the provider's embedding of "".
Vec embed_text(EmbeddingProvider& p, const std::string& text);

/// concat(embed(query.text), embed(response)); query first.
PairEmbedding embed_pair(EmbeddingProvider& p, const TracePair& t);

/// Order-preserving map of embed_pair.
std::vector<PairEmbedding> embed_trace_set(EmbeddingProvider& p, const TraceSet& t);

// ---------------------------------------------------------------------------
// Stub provider: each distinct string maps to a fixed pseudo-random unit
// vector. No similarity structure; for unit tests only.

class StubHashProvider : public EmbeddingProvider {
public:
    explicit StubHashProvider(int dim, std::size_t max_chars = 4000);
    const std::string& name() const override { return name_; }
    int dim() const override { return dim_; }
    std::size_t max_input_chars() const override { return max_chars_; }
    Vec embed(const std::string& text) override;

private:
    std::string name_;
    int dim_;
    std::size_t max_chars_;
};

// ---------------------------------------------------------------------------
// Local model: feature-hashed character trigrams + word tokens with sign
// hashing, L2-normalized. Deterministic, self-contained, and textually
// similar inputs land close in cosine distance.

class NgramHashProvider : public EmbeddingProvider {
public:
    explicit NgramHashProvider(int dim = 256, std::size_t max_chars = 4000);
    const std::string& name() const override { return name_; }
    int dim() const override { return dim_; }
    std::size_t max_input_chars() const override { return max_chars_; }
    Vec embed(const std::string& text) override;

private:
    std::string name_;
    int dim_;
    std::size_t max_chars_;
};

// ---------------------------------------------------------------------------
// Remote adapter: POST {"input": text} to an embeddings endpoint and extract
// the vector at a configurable field path (default "data.0.embedding",
// dot-separated, integers index arrays). Credentials come from an environment
// variable, never from flags.

/// Transport failures (connect/timeout/5xx) are retryable and raised as this
/// type, distinct from invalid-input errors.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RemoteEmbedderConfig {
    std::string base_url;               // e.g. http://host:port
    std::string path = "/v1/embeddings";
    std::string field_path = "data.0.embedding";
    std::string auth_env;               // env var holding the bearer token
    int dim = 1024;
    double timeout_s = 30.0;
    std::size_t max_chars = 4000;
};

class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(RemoteEmbedderConfig cfg);
    const std::string& name() const override { return name_; }
    int dim() const override { return cfg_.dim; }
    std::size_t max_input_chars() const override { return cfg_.max_chars; }
    Vec embed(const std::string& text) override;

private:
    RemoteEmbedderConfig cfg_;
    std::string name_;
};

/// Walk a dot-separated path ("data.0.embedding") through a JSON document.
const json* json_field_path(const json& doc, const std::string& path);

// ---------------------------------------------------------------------------
// Content-addressed cache wrapper. Keyed by (provider name, dim, text
// digest); memory map always, plus an optional on-disk layer laid out as
// <dir>/<name>-<dim>/<digest>.json. Cached entries store the exact text and
// are re-verified on load, so digest collisions degrade to misses.

class CachingProvider : public EmbeddingProvider {
public:
    CachingProvider(std::shared_ptr<EmbeddingProvider> inner,
                    std::optional<std::filesystem::path> cache_dir = std::nullopt);
    const std::string& name() const override { return inner_->name(); }
    int dim() const override { return inner_->dim(); }
    std::size_t max_input_chars() const override { return inner_->max_input_chars(); }
    Vec embed(const std::string& text) override;

    std::size_t memory_entries() const;

private:
    std::string key_for(const std::string& text) const;
    std::optional<Vec> load_from_disk(const std::string& key, const std::string& text);
    void store_to_disk(const std::string& key, const std::string& text, const Vec& v);

    std::shared_ptr<EmbeddingProvider> inner_;
    std::optional<std::filesystem::path> dir_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, Vec> mem_;
};

/// Named provider factory used by the CLI: "stub:<dim>", "ngram:<dim>" or
/// "ngram" (dim 256).
std::shared_ptr<EmbeddingProvider> make_provider(const std::string& spec);

}  // namespace llmfp
