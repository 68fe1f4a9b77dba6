#include "llmfp/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace llmfp {

void Dataset::validate() const {
    label_space.validate();
    for (const auto& e : entries) {
        e.traces.validate();
        if (label_space.index_of(e.label) < 0)
            throw std::invalid_argument("dataset entry label not in label space: " +
                                        e.label.display());
    }
}

std::size_t Dataset::entries_per_label() const {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& e : entries) counts[e.label.display()]++;
    if (counts.empty()) return 0;
    std::size_t w = counts.begin()->second;
    for (const auto& [k, v] : counts)
        if (v != w)
            throw std::runtime_error("dataset is not balanced: " + k + " has " +
                                     std::to_string(v) + " entries, expected " + std::to_string(w));
    if (counts.size() != label_space.size())
        throw std::runtime_error("dataset labels do not cover the label space");
    return w;
}

std::string serialize_dataset(const Dataset& d) {
    std::ostringstream out;
    for (const auto& e : d.entries) {
        json pairs = json::array();
        for (const auto& p : e.traces.pairs) pairs.push_back(trace_pair_to_json(p));
        json rec{{"trace_set", pairs},
                 {"label", label_to_json(e.label)},
                 {"config_digest", e.config_digest}};
        out << rec.dump() << '\n';
    }
    return out.str();
}

Dataset deserialize_dataset(const std::string& bytes) {
    Dataset d;
    std::istringstream in(bytes);
    std::string line;
    std::size_t record = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ParseError("malformed JSON", record);
        DatasetEntry e;
        try {
            for (const auto& pj : j.at("trace_set")) {
                e.traces.pairs.push_back(trace_pair_from_json(pj, record));
            }
            e.label = label_from_json(j.at("label"));
            e.config_digest = j.value("config_digest", std::string());
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& ex) {
            throw ParseError(ex.what(), record);
        }
        if (d.label_space.index_of(e.label) < 0) d.label_space.labels.push_back(e.label);
        d.entries.push_back(std::move(e));
        ++record;
    }
    d.validate();
    return d;
}

void save_dataset(const std::string& path, const Dataset& d) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << serialize_dataset(d);
    }
    std::filesystem::rename(tmp, path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_dataset(buf.str());
}

}  // namespace llmfp
