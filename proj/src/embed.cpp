#include "llmfp/embed.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>

#include "llmfp/http.hpp"

namespace llmfp {

Vec embed_text(EmbeddingProvider& p, const std::string& text) {
    std::string in = utf8_truncate(text, p.max_input_chars());
    Vec v = p.embed(in);
    if (v.size() != p.dim())
        throw DimensionError("embedding dim", p.dim(), static_cast<long>(v.size()));
    if (!v.allFinite()) throw std::runtime_error("provider returned non-finite embedding");
    return v;
}

PairEmbedding embed_pair(EmbeddingProvider& p, const TracePair& t) {
    PairEmbedding out(2 * p.dim());
    out << embed_text(p, t.query.text), embed_text(p, t.response);
    return out;
}

std::vector<PairEmbedding> embed_trace_set(EmbeddingProvider& p, const TraceSet& t) {
    std::vector<PairEmbedding> out;
    out.reserve(t.pairs.size());
    for (const auto& pair : t.pairs) out.push_back(embed_pair(p, pair));
    return out;
}

// ---------------------------------------------------------------------------

StubHashProvider::StubHashProvider(int dim, std::size_t max_chars)
    : name_("stub-hash"), dim_(dim), max_chars_(max_chars) {
    if (dim <= 0) throw std::invalid_argument("dim must be positive");
}

Vec StubHashProvider::embed(const std::string& text) {
    Rng rng(fnv1a64(text) ^ 0x5717b5u);
    Vec v(dim_);
    for (int i = 0; i < dim_; ++i) v[i] = rng.normal();
    double n = v.norm();
    if (n > 0) v /= n;
    else v[0] = 1.0;
    return v;
}

// ---------------------------------------------------------------------------

NgramHashProvider::NgramHashProvider(int dim, std::size_t max_chars)
    : name_("ngram-" + std::to_string(dim)), dim_(dim), max_chars_(max_chars) {
    if (dim <= 0) throw std::invalid_argument("dim must be positive");
}

Vec NgramHashProvider::embed(const std::string& text) {
    Vec v = Vec::Zero(dim_);
    auto add_feature = [&](std::string_view f, double w) {
        std::uint64_t h = fnv1a64(f);
        std::uint64_t s = fnv1a64(f, 0x9ae16a3b2f90404full);
        int idx = static_cast<int>(h % static_cast<std::uint64_t>(dim_));
        v[idx] += (s & 1) ? w : -w;
    };
    // byte trigrams
    if (text.size() >= 3) {
        for (std::size_t i = 0; i + 3 <= text.size(); ++i)
            add_feature(std::string_view(text).substr(i, 3), 1.0);
    } else if (!text.empty()) {
        add_feature(text, 1.0);
    }
    // whitespace tokens, weighted up so word identity dominates
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ' ' || text[i] == '\n' || text[i] == '\t') {
            if (i > start) add_feature(std::string_view(text).substr(start, i - start), 2.0);
            start = i + 1;
        }
    }
    double n = v.norm();
    if (n > 0) {
        v /= n;
    } else {
        // empty input: fixed deterministic unit vector
        v[static_cast<int>(fnv1a64("") % static_cast<std::uint64_t>(dim_))] = 1.0;
    }
    return v;
}

// ---------------------------------------------------------------------------

const json* json_field_path(const json& doc, const std::string& path) {
    const json* cur = &doc;
    std::size_t pos = 0;
    while (pos <= path.size()) {
        std::size_t dot = path.find('.', pos);
        std::string part = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (part.empty()) return nullptr;
        if (cur->is_array()) {
            char* end = nullptr;
            long idx = std::strtol(part.c_str(), &end, 10);
            if (end == nullptr || *end != '\0' || idx < 0 ||
                static_cast<std::size_t>(idx) >= cur->size())
                return nullptr;
            cur = &(*cur)[static_cast<std::size_t>(idx)];
        } else if (cur->is_object()) {
            auto it = cur->find(part);
            if (it == cur->end()) return nullptr;
            cur = &*it;
        } else {
            return nullptr;
        }
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    return cur;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(RemoteEmbedderConfig cfg)
    : cfg_(std::move(cfg)), name_("remote:" + cfg_.base_url + cfg_.path) {}

Vec HttpEmbeddingProvider::embed(const std::string& text) {
    httplib::Client client(cfg_.base_url);
    client.set_connection_timeout(std::chrono::milliseconds(static_cast<int>(cfg_.timeout_s * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(static_cast<int>(cfg_.timeout_s * 1000)));
    if (!cfg_.auth_env.empty()) {
        const char* tok = std::getenv(cfg_.auth_env.c_str());
        if (tok == nullptr || *tok == '\0')
            throw AuthError("environment variable " + cfg_.auth_env + " is not set");
        client.set_bearer_token_auth(tok);
    }
    json body{{"input", text}};
    auto res = client.Post(cfg_.path, body.dump(), "application/json");
    if (!res) throw TransportError("embeddings endpoint unreachable: " + cfg_.base_url);
    if (res->status == 401 || res->status == 403)
        throw AuthError("embeddings endpoint rejected credentials (HTTP " +
                        std::to_string(res->status) + ")");
    if (res->status >= 500)
        throw TransportError("embeddings endpoint HTTP " + std::to_string(res->status));
    if (res->status != 200)
        throw std::runtime_error("embeddings endpoint HTTP " + std::to_string(res->status));
    json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) throw std::runtime_error("embeddings response is not JSON");
    const json* field = json_field_path(doc, cfg_.field_path);
    if (field == nullptr || !field->is_array())
        throw std::runtime_error("no array at field path '" + cfg_.field_path + "'");
    Vec v(static_cast<long>(field->size()));
    for (std::size_t i = 0; i < field->size(); ++i) v[static_cast<long>(i)] = (*field)[i].get<double>();
    return v;
}

// ---------------------------------------------------------------------------

CachingProvider::CachingProvider(std::shared_ptr<EmbeddingProvider> inner,
                                 std::optional<std::filesystem::path> cache_dir)
    : inner_(std::move(inner)), dir_(std::move(cache_dir)) {
    if (dir_) std::filesystem::create_directories(*dir_ / (name() + "-" + std::to_string(dim())));
}

std::string CachingProvider::key_for(const std::string& text) const {
    // two independent FNV streams; collisions are caught by text comparison
    return hex64(fnv1a64(text)) + hex64(fnv1a64(text, 0x84222325cbf29ce4ull));
}

Vec CachingProvider::embed(const std::string& text) {
    std::string key = key_for(text);
    {
        std::lock_guard lock(mu_);
        auto it = mem_.find(key);
        if (it != mem_.end()) return it->second;
    }
    if (dir_) {
        if (auto v = load_from_disk(key, text)) {
            std::lock_guard lock(mu_);
            mem_.emplace(key, *v);
            return *v;
        }
    }
    Vec v = inner_->embed(text);
    {
        std::lock_guard lock(mu_);
        mem_.emplace(key, v);
    }
    if (dir_) store_to_disk(key, text, v);
    return v;
}

std::size_t CachingProvider::memory_entries() const {
    std::lock_guard lock(mu_);
    return mem_.size();
}

std::optional<Vec> CachingProvider::load_from_disk(const std::string& key, const std::string& text) {
    auto path = *dir_ / (name() + "-" + std::to_string(dim())) / (key + ".json");
    std::ifstream in(path);
    if (!in) return std::nullopt;
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    if (j.value("text", std::string()) != text) return std::nullopt;
    auto bytes = base64_decode(j.value("vector", std::string()));
    if (bytes.size() != sizeof(double) * static_cast<std::size_t>(dim())) return std::nullopt;
    Vec v(dim());
    std::memcpy(v.data(), bytes.data(), bytes.size());
    return v;
}

void CachingProvider::store_to_disk(const std::string& key, const std::string& text, const Vec& v) {
    auto base = *dir_ / (name() + "-" + std::to_string(dim()));
    auto path = base / (key + ".json");
    auto tmp = base / (key + ".tmp");
    json j{{"text", text},
           {"vector", base64_encode(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()))}};
    {
        std::ofstream out(tmp);
        out << j.dump();
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);  // atomic publish; losers just re-embed
}

std::shared_ptr<EmbeddingProvider> make_provider(const std::string& spec) {
    auto colon = spec.find(':');
    std::string kind = spec.substr(0, colon);
    int dim = 0;
    if (colon != std::string::npos) dim = std::stoi(spec.substr(colon + 1));
    if (kind == "stub") return std::make_shared<StubHashProvider>(dim > 0 ? dim : 4);
    if (kind == "ngram") return std::make_shared<NgramHashProvider>(dim > 0 ? dim : 256);
    throw std::invalid_argument("unknown embedder spec: " + spec +
                                " (expected stub:<dim> or ngram:<dim>)");
}

}  // namespace llmfp
