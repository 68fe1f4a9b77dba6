#include "llmfp/probe.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "llmfp/http.hpp"

#include "llmfp/embed.hpp"  // json_field_path

namespace llmfp {

HttpOracle::HttpOracle(OracleEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    endpoint_.validate();
}

OracleAttempt HttpOracle::ask(const Query& q) {
    httplib::Client client(endpoint_.base_url);
    const auto timeout =
        std::chrono::milliseconds(static_cast<long>(endpoint_.request_timeout * 1000));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    if (!endpoint_.auth_token_ref.empty()) {
        const char* tok = std::getenv(endpoint_.auth_token_ref.c_str());
        if (tok == nullptr || *tok == '\0')
            return {OracleAttempt::Status::auth, "",
                    "environment variable " + endpoint_.auth_token_ref + " is not set"};
        client.set_bearer_token_auth(tok);
    }

    json body{{"messages", json::array({json{{"role", "user"}, {"content", q.text}}})}};
    auto res = client.Post(endpoint_.path, body.dump(), "application/json");
    if (!res)
        return {OracleAttempt::Status::retryable, "",
                "no response from " + endpoint_.base_url + " (error " +
                    httplib::to_string(res.error()) + ")"};
    if (res->status == 401 || res->status == 403)
        return {OracleAttempt::Status::auth, "",
                "credentials rejected (HTTP " + std::to_string(res->status) + ")"};
    if (res->status >= 400 && res->status < 500)
        return {OracleAttempt::Status::terminal, "",
                "client error (HTTP " + std::to_string(res->status) + ")"};
    if (res->status != 200)
        return {OracleAttempt::Status::retryable, "",
                "server error (HTTP " + std::to_string(res->status) + ")"};

    json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded())
        return {OracleAttempt::Status::terminal, "", "response body is not JSON"};
    const json* field = json_field_path(doc, endpoint_.response_field_path);
    if (field == nullptr || !field->is_string())
        return {OracleAttempt::Status::terminal, "",
                "no string at field path '" + endpoint_.response_field_path + "'"};
    return {OracleAttempt::Status::ok, field->get<std::string>(), ""};
}

TracePair query_oracle(Oracle& o, const Query& q, int max_retries, double backoff_s) {
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        OracleAttempt r = o.ask(q);
        switch (r.status) {
            case OracleAttempt::Status::ok:
                return {q, r.text, false};
            case OracleAttempt::Status::auth:
                throw AuthError("query " + q.id + ": " + r.diagnostic);
            case OracleAttempt::Status::terminal:
                std::cerr << "error: query " << q.id << ": " << r.diagnostic << "\n";
                return {q, "", true};
            case OracleAttempt::Status::retryable:
                if (attempt == max_retries) {
                    std::cerr << "error: query " << q.id << " failed after "
                              << (max_retries + 1) << " attempts: " << r.diagnostic << "\n";
                    return {q, "", true};
                }
                if (backoff_s > 0)
                    std::this_thread::sleep_for(
                        std::chrono::milliseconds(static_cast<long>(backoff_s * 1000)));
                break;
        }
    }
    return {q, "", true};  // unreachable
}

TracePair query_oracle(const OracleEndpoint& endpoint, const Query& q) {
    HttpOracle oracle(endpoint);
    return query_oracle(oracle, q, endpoint.max_retries);
}

TraceSet collect_traces(Oracle& o, const QueryStrategy& strategy, int max_retries,
                        int parallelism, double backoff_s) {
    strategy.validate();
    const std::size_t k = strategy.size();
    TraceSet result;
    result.pairs.resize(k);

    if (parallelism <= 1) {
        for (std::size_t i = 0; i < k; ++i)
            result.pairs[i] = query_oracle(o, strategy.queries[i], max_retries, backoff_s);
        return result;
    }

    // fan out, then re-sort into strategy order (the oracle is stateless, so
    // submission order does not matter)
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(parallelism));
    auto worker = [&](std::size_t slot) {
        try {
            for (std::size_t i = next.fetch_add(1); i < k; i = next.fetch_add(1))
                result.pairs[i] = query_oracle(o, strategy.queries[i], max_retries, backoff_s);
        } catch (...) {
            errors[slot] = std::current_exception();
        }
    };
    std::vector<std::thread> threads;
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(parallelism), k);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker, t);
    for (auto& t : threads) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return result;
}

TraceSet collect_traces(const OracleEndpoint& endpoint, const QueryStrategy& strategy) {
    HttpOracle oracle(endpoint);
    return collect_traces(oracle, strategy, endpoint.max_retries,
                          endpoint.per_query_parallelism);
}

}  // namespace llmfp
