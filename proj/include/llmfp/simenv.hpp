#pragma once

// Simulated LLM-integrated applications: a deterministic synthetic model
// family, the prompting-configuration universe (system prompts, sampling
// hyperparameters, RAG/CoT frameworks), and dataset generation.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "llmfp/core.hpp"
#include "llmfp/dataset.hpp"

namespace llmfp {

// ---------------------------------------------------------------------------
// Prompting configurations

enum class FrameworkKind { none, rag, cot };

std::string to_string(FrameworkKind k);
FrameworkKind framework_from_string(const std::string& s);

struct Framework {
    FrameworkKind kind = FrameworkKind::none;
    std::vector<std::string> corpus_chunks;  // rag only, non-empty there
    std::uint64_t template_id = 0;           // digest of the chosen template text

    bool operator==(const Framework&) const = default;
};

struct PromptingConfiguration {
    double temperature = 0.0;          // [0, 1]
    double frequency_penalty = 0.65;   // [0.65, 1]
    std::optional<std::string> system_prompt;
    Framework framework;

    void validate() const;
    json to_json() const;
    static PromptingConfiguration from_json(const json& j);
    std::string digest() const;

    bool operator==(const PromptingConfiguration&) const = default;
};

struct ConfigPool {
    std::vector<std::string> system_prompts;
    std::vector<std::string> rag_templates;  // contain {context} and {query} slots
    std::vector<std::string> rag_corpus;
    std::vector<std::string> cot_templates;  // contain a {query} slot
    double framework_probability = 0.2;

    void validate() const;
    json to_json() const;
    static ConfigPool from_json(const json& j);
};

/// Bundled pool: 16 system prompts, 6 RAG templates, a 30-chunk corpus and
/// 2 CoT templates.
const ConfigPool& default_config_pool();

void save_config_pool(const std::string& path, const ConfigPool& pool);
ConfigPool load_config_pool(const std::string& path);

/// Uniform draws from the pool ranges; a framework (RAG or CoT, fair coin)
/// is attached with probability pool.framework_probability. Deterministic in
/// rng_seed.
PromptingConfiguration sample_config(const ConfigPool& pool, std::uint64_t rng_seed);

/// Per-component partition into two disjoint halves (sizes differ by at most
/// one). Every component needs >= 2 entries.
std::pair<ConfigPool, ConfigPool> split_pools(const ConfigPool& pool, std::uint64_t rng_seed);

// ---------------------------------------------------------------------------
// Synthetic models

/// A deterministic stand-in for a deployed LLM. Same (style_seed, query,
/// config, noise_seed) always produces the same response.
struct SyntheticModel {
    ModelLabel label;
    std::uint64_t style_seed = 0;
    /// Canned answers per query family, indexed by QueryFamily. Entries may
    /// contain a {q} slot that receives a prefix of the query text.
    std::array<std::vector<std::string>, kNumQueryFamilies> response_tables;
    std::vector<std::string> detail_sentences;  // appended per verbosity
    std::vector<std::string> fillers;           // noise vocabulary
    std::vector<std::pair<std::string, std::string>> synonyms;
    double leak_resistance = 1.0;  // P(system prompt fails to override the banner)
    int verbosity = 1;

    void validate() const;
};

/// The bundled desk-scale family: aligned and non-aligned models, self-aware
/// and mislabeled banners, and one near-duplicate pair differing only in
/// verbosity. n <= 10.
std::vector<SyntheticModel> make_default_family(int n = 10);

/// Synthetic stand-ins labeled with the full 40-model metadata roster.
std::vector<SyntheticModel> make_roster_family();

/// The 40 (vendor, model_id) labels used as metadata.
const std::vector<ModelLabel>& model_roster();

/// The configured application's response: banner answers may be overridden
/// by a persona derived from the system prompt (probability 1 -
/// leak_resistance; trigger-wrapped banners always leak), alignment queries
/// return the model's canonical refusal regardless of configuration,
/// temperature scales lexical noise, frequency_penalty damps repeated filler
/// tokens, RAG/CoT prepend framework-specific framing. Pure function of its
/// arguments.
std::string apply_config(const PromptingConfiguration& s, const SyntheticModel& model,
                         const Query& q, std::uint64_t noise_seed);

/// Algorithm-2-style generation: w repetitions over the model list, one
/// freshly sampled configuration per (model, repetition). Exactly
/// w * |models| entries, deterministic in rng_seed.
Dataset make_dataset(std::size_t w, const QueryStrategy& strategy, const ConfigPool& pool,
                     const std::vector<SyntheticModel>& models, std::uint64_t rng_seed);

}  // namespace llmfp
