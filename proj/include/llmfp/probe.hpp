#pragma once

// Oracle abstraction over the target application plus trace collection. Each
// exchange is an independent, stateless, single-message interaction: no
// history is ever sent.

#include <memory>
#include <string>

#include "llmfp/core.hpp"
#include "llmfp/simenv.hpp"

namespace llmfp {

struct OracleEndpoint {
    std::string base_url;                      // e.g. http://127.0.0.1:8080
    std::string path = "/v1/chat/completions";
    std::string auth_token_ref;                // env var holding the secret, never the secret
    double request_timeout = 30.0;             // seconds
    int max_retries = 2;
    int per_query_parallelism = 1;
    std::string response_field_path = "choices.0.message.content";

    void validate() const {
        if (base_url.empty()) throw std::invalid_argument("endpoint base_url is empty");
        if (request_timeout <= 0) throw std::invalid_argument("timeout must be positive");
        if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
        if (per_query_parallelism < 1)
            throw std::invalid_argument("per_query_parallelism must be positive");
    }
};

/// One attempt against the oracle. The retry policy lives in query_oracle,
/// not in the oracle implementations.
struct OracleAttempt {
    enum class Status {
        ok,
        retryable,  // network failure, timeout, 5xx
        terminal,   // 4xx client error or unusable payload; retrying cannot help
        auth,       // credential rejection; hard error
    };
    Status status = Status::ok;
    std::string text;
    std::string diagnostic;
};

class Oracle {
public:
    virtual ~Oracle() = default;
    virtual OracleAttempt ask(const Query& q) = 0;
};

/// Single-turn chat-completion style HTTP adapter: POST one user-role
/// message, extract the assistant text at the configured field path.
/// Sampling stays whatever the server chooses; the prompting configuration
/// belongs to the target.
class HttpOracle : public Oracle {
public:
    explicit HttpOracle(OracleEndpoint endpoint);
    OracleAttempt ask(const Query& q) override;
    const OracleEndpoint& endpoint() const { return endpoint_; }

private:
    OracleEndpoint endpoint_;
};

/// In-process oracle backed by a synthetic model under a fixed
/// configuration. Deterministic: the noise seed derives from the query text,
/// so repeating a query repeats its response.
class SyntheticOracle : public Oracle {
public:
    SyntheticOracle(SyntheticModel model, PromptingConfiguration config)
        : model_(std::move(model)), config_(std::move(config)) {}
    OracleAttempt ask(const Query& q) override {
        return {OracleAttempt::Status::ok, apply_config(config_, model_, q, fnv1a64(q.text)), ""};
    }

private:
    SyntheticModel model_;
    PromptingConfiguration config_;
};

/// Fixed-backoff retry loop over o.ask. Soft failures after max_retries
/// produce an error-flagged pair with an empty response and a logged
/// diagnostic; auth failures throw AuthError immediately.
TracePair query_oracle(Oracle& o, const Query& q, int max_retries, double backoff_s = 0.25);
TracePair query_oracle(const OracleEndpoint& endpoint, const Query& q);

/// One pair per query, in strategy order regardless of completion order.
/// Queries may be issued concurrently up to `parallelism`.
TraceSet collect_traces(Oracle& o, const QueryStrategy& strategy, int max_retries = 0,
                        int parallelism = 1, double backoff_s = 0.25);
TraceSet collect_traces(const OracleEndpoint& endpoint, const QueryStrategy& strategy);

}  // namespace llmfp
