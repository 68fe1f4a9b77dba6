#include <doctest.h>

#include <filesystem>

#include "llmfp/embed.hpp"

using namespace llmfp;

namespace {

// instrumented wrapper so tests can count provider invocations
class CountingProvider : public EmbeddingProvider {
public:
    explicit CountingProvider(std::shared_ptr<EmbeddingProvider> inner) : inner_(std::move(inner)) {}
    const std::string& name() const override { return inner_->name(); }
    int dim() const override { return inner_->dim(); }
    std::size_t max_input_chars() const override { return inner_->max_input_chars(); }
    Vec embed(const std::string& text) override {
        ++calls;
        return inner_->embed(text);
    }
    int calls = 0;

private:
    std::shared_ptr<EmbeddingProvider> inner_;
};

TracePair pair_of(const std::string& q, const std::string& o, bool err = false) {
    return {{"id", q, QueryFamily::meta_information, false}, o, err};
}

}  // namespace

TEST_CASE("stub provider is deterministic and input-sensitive") {
    StubHashProvider p(4);
    Vec a1 = embed_text(p, "a");
    Vec a2 = embed_text(p, "a");
    CHECK(a1.size() == 4);
    CHECK(a1 == a2);

    StubHashProvider p2(4);
    CHECK(embed_text(p2, "a") == a1);  // stable across instances

    CHECK(embed_text(p, "a") != embed_text(p, "b"));
}

TEST_CASE("long inputs embed like their truncated prefix") {
    StubHashProvider p(4, /*max_chars=*/10);
    std::string prefix = "0123456789";
    std::string longer = prefix;
    for (int i = 0; i < 9; ++i) longer += "filler padding";
    CHECK(embed_text(p, longer) == embed_text(p, prefix));

    // multi-byte boundary: max_chars counts code points, not bytes
    StubHashProvider p2(4, 2);
    CHECK(embed_text(p2, "éééé") == embed_text(p2, "éé"));
}

TEST_CASE("pair embedding is query-first concatenation") {
    StubHashProvider p(4);
    PairEmbedding e = embed_pair(p, pair_of("q text", "o text"));
    CHECK(e.size() == 8);
    CHECK(e.head(4) == embed_text(p, "q text"));
    CHECK(e.tail(4) == embed_text(p, "o text"));

    // error-flagged pair embeds the empty response
    PairEmbedding err = embed_pair(p, pair_of("q text", "", true));
    CHECK(err.tail(4) == embed_text(p, ""));

    // depends only on the texts, not on ids or flags
    TracePair other = pair_of("q text", "o text");
    other.query.id = "different_id";
    other.query.family = QueryFamily::malformed;
    CHECK(embed_pair(p, other) == e);

    // same response, different query text -> different vector
    CHECK(embed_pair(p, pair_of("another q", "o text")) != e);
}

TEST_CASE("trace set embedding preserves order and length") {
    StubHashProvider p(4);
    TraceSet t;
    for (int i = 0; i < 8; ++i)
        t.pairs.push_back(pair_of("q" + std::to_string(i), "o" + std::to_string(i)));
    auto embs = embed_trace_set(p, t);
    REQUIRE(embs.size() == 8);
    for (int i = 0; i < 8; ++i) CHECK(embs[static_cast<std::size_t>(i)] == embed_pair(p, t.pairs[static_cast<std::size_t>(i)]));

    TraceSet single;
    single.pairs.push_back(pair_of("q", "o"));
    CHECK(embed_trace_set(p, single).size() == 1);
}

TEST_CASE("ngram provider maps similar texts closer than unrelated ones") {
    NgramHashProvider p(128);
    Vec a = embed_text(p, "I am Aquila, a conversational model by Synthlab.");
    Vec b = embed_text(p, "I am Aquila, a conversational model by Synthlab!");
    Vec c = embed_text(p, "Unrelated words entirely: octopus harpsichord nebula.");
    const double sim_ab = a.dot(b);
    const double sim_ac = a.dot(c);
    CHECK(sim_ab > sim_ac);
    CHECK(sim_ab > 0.8);
    // unit norm and determinism
    CHECK(a.norm() == doctest::Approx(1.0));
    CHECK(embed_text(p, "") == embed_text(p, ""));
    CHECK(embed_text(p, "").norm() > 0.0);
}

TEST_CASE("cache avoids provider invocations on repeats") {
    auto counter = std::make_shared<CountingProvider>(std::make_shared<StubHashProvider>(4));
    CachingProvider cached(counter);
    Vec v1 = embed_text(cached, "hello");
    CHECK(counter->calls == 1);
    Vec v2 = embed_text(cached, "hello");
    CHECK(counter->calls == 1);  // zero new invocations
    CHECK(v1 == v2);
    embed_text(cached, "world");
    CHECK(counter->calls == 2);
}

TEST_CASE("disk cache survives new provider instances") {
    auto dir = std::filesystem::temp_directory_path() / "llmfp-embed-cache-test";
    std::filesystem::remove_all(dir);

    auto c1 = std::make_shared<CountingProvider>(std::make_shared<StubHashProvider>(4));
    Vec v1;
    {
        CachingProvider cached(c1, dir);
        v1 = embed_text(cached, "persisted");
        CHECK(c1->calls == 1);
    }
    auto c2 = std::make_shared<CountingProvider>(std::make_shared<StubHashProvider>(4));
    CachingProvider cached2(c2, dir);
    Vec v2 = embed_text(cached2, "persisted");
    CHECK(c2->calls == 0);
    CHECK(v1 == v2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("json field path walker") {
    json doc = json::parse(R"({"data":[{"embedding":[1.0,2.0]}],"s":"x"})");
    const json* f = json_field_path(doc, "data.0.embedding");
    REQUIRE(f != nullptr);
    CHECK(f->is_array());
    CHECK(json_field_path(doc, "data.1.embedding") == nullptr);
    CHECK(json_field_path(doc, "missing") == nullptr);
    CHECK(json_field_path(doc, "s")->get<std::string>() == "x");
}

TEST_CASE("provider factory specs") {
    CHECK(make_provider("stub:4")->dim() == 4);
    CHECK(make_provider("ngram:64")->dim() == 64);
    CHECK(make_provider("ngram")->dim() == 256);
    CHECK_THROWS_AS(make_provider("nope:1"), std::invalid_argument);
}
