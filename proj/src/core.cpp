#include "llmfp/core.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <unordered_set>

namespace llmfp {

std::string to_string(QueryFamily f) {
    switch (f) {
        case QueryFamily::banner_grabbing: return "banner_grabbing";
        case QueryFamily::alignment: return "alignment";
        case QueryFamily::weak_alignment: return "weak_alignment";
        case QueryFamily::meta_information: return "meta_information";
        case QueryFamily::malformed: return "malformed";
    }
    throw std::invalid_argument("unknown query family");
}

QueryFamily query_family_from_string(const std::string& s) {
    if (s == "banner_grabbing") return QueryFamily::banner_grabbing;
    if (s == "alignment") return QueryFamily::alignment;
    if (s == "weak_alignment") return QueryFamily::weak_alignment;
    if (s == "meta_information") return QueryFamily::meta_information;
    if (s == "malformed") return QueryFamily::malformed;
    throw std::invalid_argument("unknown query family: " + s);
}

void QueryStrategy::validate() const {
    if (queries.empty()) throw std::invalid_argument("query strategy is empty");
    std::unordered_set<std::string> ids;
    for (const auto& q : queries) {
        if (q.text.empty()) throw std::invalid_argument("query " + q.id + " has empty text");
        if (!ids.insert(q.id).second)
            throw std::invalid_argument("duplicate query id: " + q.id);
    }
}

QueryStrategy QueryStrategy::prefix(std::size_t k) const {
    QueryStrategy out;
    k = std::min(k, queries.size());
    out.queries.assign(queries.begin(), queries.begin() + static_cast<long>(k));
    return out;
}

void TraceSet::validate() const {
    if (pairs.empty()) throw std::invalid_argument("trace set is empty");
    std::unordered_set<std::string> ids;
    for (const auto& p : pairs) {
        if (p.error_flag && !p.response.empty())
            throw std::invalid_argument("error-flagged pair has non-empty response");
        if (!ids.insert(p.query.id).second)
            throw std::invalid_argument("duplicate query id in trace set: " + p.query.id);
    }
}

TraceSet TraceSet::prefix(std::size_t k) const {
    TraceSet out;
    k = std::min(k, pairs.size());
    out.pairs.assign(pairs.begin(), pairs.begin() + static_cast<long>(k));
    return out;
}

int LabelSpace::index_of(const ModelLabel& l) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == l) return static_cast<int>(i);
    return -1;
}

void LabelSpace::validate() const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i].model_id.empty()) throw std::invalid_argument("label with empty model_id");
        for (std::size_t j = i + 1; j < labels.size(); ++j)
            if (labels[i] == labels[j])
                throw std::invalid_argument("duplicate label: " + labels[i].display());
    }
}

json trace_pair_to_json(const TracePair& p) {
    return json{{"query_id", p.query.id},
                {"query_text", p.query.text},
                {"family", to_string(p.query.family)},
                {"trigger_wrapped", p.query.trigger_wrapped},
                {"response", p.response},
                {"error_flag", p.error_flag}};
}

TracePair trace_pair_from_json(const json& j, std::size_t record_index) {
    if (!j.is_object()) throw ParseError("not a JSON object", record_index);
    TracePair p;
    try {
        p.query.id = j.at("query_id").get<std::string>();
        p.query.text = j.at("query_text").get<std::string>();
        p.query.family = query_family_from_string(j.at("family").get<std::string>());
        p.query.trigger_wrapped = j.at("trigger_wrapped").get<bool>();
        p.response = j.at("response").get<std::string>();
        p.error_flag = j.at("error_flag").get<bool>();
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(e.what(), record_index);
    }
    return p;
}

std::string serialize_trace_set(const TraceSet& t) {
    std::ostringstream out;
    for (const auto& p : t.pairs) out << trace_pair_to_json(p).dump() << '\n';
    return out.str();
}

TraceSet deserialize_trace_set(const std::string& bytes) {
    TraceSet t;
    std::size_t record = 0;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        std::size_t eol = bytes.find('\n', pos);
        std::string line = bytes.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        pos = eol == std::string::npos ? bytes.size() : eol + 1;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ParseError("malformed JSON", record);
        t.pairs.push_back(trace_pair_from_json(j, record));
        ++record;
    }
    if (t.pairs.empty()) throw ParseError("no records", 0);
    t.validate();
    return t;
}

json label_to_json(const ModelLabel& l) {
    return json{{"vendor", l.vendor}, {"model_id", l.model_id}};
}

ModelLabel label_from_json(const json& j) {
    return ModelLabel{j.at("vendor").get<std::string>(), j.at("model_id").get<std::string>()};
}

// ---------------------------------------------------------------------------
// base64 / utf8 helpers declared in common.hpp

static const char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        std::uint32_t n = std::uint32_t(p[i]) << 16;
        if (i + 1 < len) n |= std::uint32_t(p[i + 1]) << 8;
        if (i + 2 < len) n |= std::uint32_t(p[i + 2]);
        out.push_back(kB64Alphabet[(n >> 18) & 63]);
        out.push_back(kB64Alphabet[(n >> 12) & 63]);
        out.push_back(i + 1 < len ? kB64Alphabet[(n >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? kB64Alphabet[n & 63] : '=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    std::array<int, 256> rev;
    rev.fill(-1);
    for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kB64Alphabet[i])] = i;

    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t buf = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int v = rev[static_cast<unsigned char>(c)];
        if (v < 0) throw std::invalid_argument("invalid base64 character");
        buf = (buf << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((buf >> bits) & 0xff));
        }
    }
    return out;
}

std::string utf8_truncate(std::string_view text, std::size_t max_chars) {
    std::size_t chars = 0;
    std::size_t i = 0;
    while (i < text.size() && chars < max_chars) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        std::size_t adv = 1;
        if ((c & 0x80) == 0x00) adv = 1;
        else if ((c & 0xe0) == 0xc0) adv = 2;
        else if ((c & 0xf0) == 0xe0) adv = 3;
        else if ((c & 0xf8) == 0xf0) adv = 4;
        i = std::min(text.size(), i + adv);
        ++chars;
    }
    return std::string(text.substr(0, i));
}

}  // namespace llmfp
