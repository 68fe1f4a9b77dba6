#pragma once

// Labeled trace collections produced by the dataset generator and consumed
// by training. On disk: JSON Lines, one entry per line with keys
// {trace_set, label, config_digest}.

#include <string>
#include <vector>

#include "llmfp/core.hpp"

namespace llmfp {

struct DatasetEntry {
    TraceSet traces;
    ModelLabel label;
    std::string config_digest;

    bool operator==(const DatasetEntry&) const = default;
};

struct Dataset {
    std::vector<DatasetEntry> entries;
    LabelSpace label_space;

    std::size_t size() const { return entries.size(); }
    void validate() const;

    /// Entries per label; throws if the dataset is unbalanced.
    std::size_t entries_per_label() const;

    bool operator==(const Dataset&) const = default;
};

std::string serialize_dataset(const Dataset& d);
Dataset deserialize_dataset(const std::string& bytes);

void save_dataset(const std::string& path, const Dataset& d);
Dataset load_dataset(const std::string& path);

}  // namespace llmfp
