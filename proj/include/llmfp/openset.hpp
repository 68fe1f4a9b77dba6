#pragma once

// Template database for open-set matching: per-model averaged signature
// vectors, cosine ranking, enrollment of unseen models and the leave-one-out
// evaluation protocol.

#include <map>
#include <string>
#include <vector>

#include "llmfp/net.hpp"
#include "llmfp/simenv.hpp"
#include "llmfp/train.hpp"

namespace llmfp {

/// cos(a, b) = dot / (|a||b|), clamped to [-1, 1] against rounding.
/// Bitwise-equal inputs return exactly 1. Throws on dimension mismatch or
/// zero vectors.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Arithmetic mean of the signatures, unnormalized (cosine matching ignores
/// scale). Throws on an empty list or mixed dims.
Eigen::VectorXd build_template(const std::vector<Signature>& signatures);

struct TemplateEntry {
    Eigen::VectorXf template_vec;  // stored as 32-bit floats, the on-disk unit
    std::size_t sample_count = 0;
};

struct TemplateDB {
    std::string net_fingerprint;  // digest of the checkpoint that produced the signatures
    std::map<ModelLabel, TemplateEntry> entries;

    std::size_t size() const { return entries.size(); }
};

/// Adds the averaged template for a new label. Re-enrolling an existing
/// label throws unless overwrite is set. The caller passes the fingerprint
/// of the net that produced the signatures; it must match the database's
/// (an empty database adopts it).
void enroll(TemplateDB& db, const ModelLabel& label, const std::vector<Signature>& signatures,
            const std::string& producing_fingerprint, bool overwrite = false);

/// Weighted-mean merge into an existing entry; equals one-shot enrollment
/// over the union of samples.
void enroll_update(TemplateDB& db, const ModelLabel& label,
                   const std::vector<Signature>& signatures,
                   const std::string& producing_fingerprint);

struct MatchResult {
    ModelLabel label;
    double similarity = 0.0;
};

/// Scores every template, descending; ties break by label lexicographic
/// order. Throws FingerprintMismatchError when the signature comes from a
/// different net than the database.
std::vector<MatchResult> match(const TemplateDB& db, const Signature& sig,
                               const std::string& producing_fingerprint);

// ---------------------------------------------------------------------------
// Persistence: single JSON document, templates as base64 little-endian f32.

void save_template_db(const std::string& path, const TemplateDB& db);
TemplateDB load_template_db(const std::string& path);

// ---------------------------------------------------------------------------
// Leave-one-out protocol: for every model, train the siamese encoder on the
// others, enroll the held-out model from a disjoint trace batch, then measure
// how often fresh held-out-configuration traces match it.

struct LeaveOneOutOptions {
    std::size_t train_w = 15;       // trace sets per training model
    std::size_t enroll_w = 8;       // trace sets used to build the held-out template
    std::size_t eval_w = 10;        // trace sets scored per held-out model
    NetConfig net_config;
    TrainConfig train_config;
    std::uint64_t seed = 0;
};

struct LeaveOneOutResult {
    std::vector<std::pair<ModelLabel, double>> per_model_accuracy;
    double mean_accuracy = 0.0;
};

LeaveOneOutResult leave_one_out_eval(const std::vector<SyntheticModel>& models,
                                     const ConfigPool& pool, const QueryStrategy& strategy,
                                     EmbeddingProvider& provider,
                                     const LeaveOneOutOptions& options);

}  // namespace llmfp
