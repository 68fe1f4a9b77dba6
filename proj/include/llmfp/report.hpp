#pragma once

// Machine-readable scan report. The schema is versioned and pinned by golden
// tests; wall_time_s is the only field expected to vary between identical
// runs.

#include <string>
#include <vector>

#include "llmfp/core.hpp"

namespace llmfp {

inline constexpr const char* kToolName = "llmfp";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportVersion = 1;

struct ScanReport {
    json target;  // endpoint descriptor (never contains secrets)
    std::string mode;  // "closed" | "open"
    ModelLabel prediction;
    double confidence = 0.0;
    std::vector<std::pair<ModelLabel, double>> ranking;  // top-5, descending
    std::size_t queries_used = 0;
    TraceSet traces;
    double wall_time_s = 0.0;
    std::string checkpoint_digest;

    json to_json() const {
        json ranking_json = json::array();
        for (const auto& [label, score] : ranking)
            ranking_json.push_back(json{{"vendor", label.vendor},
                                        {"model_id", label.model_id},
                                        {"score", score}});
        json traces_json = json::array();
        for (const auto& p : traces.pairs) traces_json.push_back(trace_pair_to_json(p));
        return json{{"report_version", kReportVersion},
                    {"tool", json{{"name", kToolName}, {"version", kToolVersion}}},
                    {"target", target},
                    {"mode", mode},
                    {"prediction", label_to_json(prediction)},
                    {"confidence", confidence},
                    {"ranking", ranking_json},
                    {"queries_used", queries_used},
                    {"traces", traces_json},
                    {"wall_time_s", wall_time_s},
                    {"checkpoint_digest", checkpoint_digest}};
    }
};

}  // namespace llmfp
