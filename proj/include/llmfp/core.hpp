#pragma once

// Domain types shared by every module, plus their canonical serialized forms.
// All types here are immutable value types once constructed; they can be
// shared freely across threads.

#include <optional>
#include <string>
#include <vector>

#include "llmfp/common.hpp"

namespace llmfp {

// ---------------------------------------------------------------------------
// Queries

enum class QueryFamily {
    banner_grabbing,
    alignment,
    weak_alignment,
    meta_information,
    malformed,
};

constexpr int kNumQueryFamilies = 5;

std::string to_string(QueryFamily f);
QueryFamily query_family_from_string(const std::string& s);

/// One probe: stable id, the probe text sent to the target, its family and
/// whether the text already embeds the prompt-injection execution trigger.
struct Query {
    std::string id;
    std::string text;
    QueryFamily family = QueryFamily::banner_grabbing;
    bool trigger_wrapped = false;

    bool operator==(const Query&) const = default;
};

/// Ordered list of probes; order is the submission order.
struct QueryStrategy {
    std::vector<Query> queries;

    std::size_t size() const { return queries.size(); }

    /// Throws std::invalid_argument on empty strategy, empty texts or
    /// duplicate ids.
    void validate() const;

    /// First k probes (k clamped to size).
    QueryStrategy prefix(std::size_t k) const;
};

// ---------------------------------------------------------------------------
// Traces

/// A single (query, response) interaction. error_flag means the oracle failed
/// after retries; in that case response is empty.
struct TracePair {
    Query query;
    std::string response;
    bool error_flag = false;

    bool operator==(const TracePair&) const = default;
};

/// The evidence fed to inference: 1..k pairs, at most one per query id.
struct TraceSet {
    std::vector<TracePair> pairs;

    std::size_t size() const { return pairs.size(); }
    void validate() const;

    /// First k pairs (k clamped to size).
    TraceSet prefix(std::size_t k) const;

    bool operator==(const TraceSet&) const = default;
};

// ---------------------------------------------------------------------------
// Labels

struct ModelLabel {
    std::string vendor;
    std::string model_id;

    bool operator==(const ModelLabel&) const = default;
    bool operator<(const ModelLabel& o) const {
        return vendor != o.vendor ? vendor < o.vendor : model_id < o.model_id;
    }
    std::string display() const { return vendor.empty() ? model_id : vendor + "/" + model_id; }
};

/// Ordered label list; the index of a label is its class id and is stable
/// across save/load.
struct LabelSpace {
    std::vector<ModelLabel> labels;

    std::size_t size() const { return labels.size(); }
    /// Index of the label, or -1 when absent.
    int index_of(const ModelLabel& l) const;
    void validate() const;

    bool operator==(const LabelSpace&) const = default;
};

// ---------------------------------------------------------------------------
// Serialization. Trace files are UTF-8 JSON Lines: one record per pair with
// keys {query_id, query_text, family, trigger_wrapped, response, error_flag}.
// Responses are stored verbatim and untruncated; no unicode normalization is
// applied anywhere (formatting quirks are fingerprint signal).

json trace_pair_to_json(const TracePair& p);
TracePair trace_pair_from_json(const json& j, std::size_t record_index);

std::string serialize_trace_set(const TraceSet& t);
/// Rejects malformed input with a ParseError carrying the failing record
/// index (0-based line number).
TraceSet deserialize_trace_set(const std::string& bytes);

json label_to_json(const ModelLabel& l);
ModelLabel label_from_json(const json& j);

}  // namespace llmfp
