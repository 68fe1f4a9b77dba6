#include <doctest.h>

#include "llmfp/core.hpp"
#include "llmfp/strategy.hpp"

using namespace llmfp;

namespace {

TraceSet one_pair_set(const std::string& q, const std::string& o) {
    TraceSet t;
    t.pairs.push_back({{"q0", q, QueryFamily::banner_grabbing, false}, o, false});
    return t;
}

// unicode snippets for the round-trip property, newlines and quotes included
const char* kSnippets[] = {
    "Bonjour, how are you doing today? ¿Qué tal?'",
    "你好，世界",
    "emoji \U0001f50d and \"quotes\" and \\backslashes\\",
    "line\nbreaks\r\nand\ttabs",
    "([{<!– trailing trigger bytes",
    "",
    "plain ascii",
};

}  // namespace

TEST_CASE("trace set round-trip is the identity") {
    TraceSet t = one_pair_set("a", "b");
    CHECK(deserialize_trace_set(serialize_trace_set(t)) == t);
}

TEST_CASE("default 8-probe strategy serializes to 8 records") {
    TraceSet t;
    for (const auto& q : default_strategy().queries) t.pairs.push_back({q, q.text, false});
    std::string bytes = serialize_trace_set(t);
    std::size_t lines = 0;
    for (char c : bytes)
        if (c == '\n') ++lines;
    CHECK(lines == 8);
    CHECK(deserialize_trace_set(bytes) == t);
}

TEST_CASE("truncated stream fails with the record index") {
    TraceSet t;
    for (int i = 0; i < 3; ++i)
        t.pairs.push_back({{"q" + std::to_string(i), "text", QueryFamily::malformed, false},
                           "resp" + std::to_string(i), false});
    std::string bytes = serialize_trace_set(t);
    std::string cut = bytes.substr(0, bytes.size() - 12);  // slices into the last record
    try {
        deserialize_trace_set(cut);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.record_index() == 2);
        CHECK(std::string(e.what()).find("record 2") != std::string::npos);
    }
}

TEST_CASE("round-trip holds over random unicode traces") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        TraceSet t;
        const std::size_t k = 1 + rng.uniform_int(8);
        for (std::size_t i = 0; i < k; ++i) {
            std::string text;
            std::string resp;
            for (int piece = 0; piece < 3; ++piece) {
                text += kSnippets[rng.uniform_int(std::size(kSnippets))];
                resp += kSnippets[rng.uniform_int(std::size(kSnippets))];
            }
            if (text.empty()) text = "x";
            const bool err = rng.bernoulli(0.1);
            t.pairs.push_back({{"q" + std::to_string(i), text,
                                static_cast<QueryFamily>(rng.uniform_int(kNumQueryFamilies)),
                                rng.bernoulli(0.2)},
                               err ? "" : resp, err});
        }
        CHECK(deserialize_trace_set(serialize_trace_set(t)) == t);
    }
}

TEST_CASE("trace validation rejects bad shapes") {
    TraceSet empty;
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

    TraceSet flagged = one_pair_set("q", "still here");
    flagged.pairs[0].error_flag = true;
    CHECK_THROWS_AS(flagged.validate(), std::invalid_argument);

    TraceSet dup = one_pair_set("q", "r");
    dup.pairs.push_back(dup.pairs[0]);
    CHECK_THROWS_AS(dup.validate(), std::invalid_argument);
}

TEST_CASE("strategy validation") {
    QueryStrategy s;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.queries.push_back({"a", "text", QueryFamily::alignment, false});
    s.queries.push_back({"a", "other", QueryFamily::alignment, false});
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.queries[1].id = "b";
    CHECK_NOTHROW(s.validate());
    CHECK(s.prefix(1).size() == 1);
    CHECK(s.prefix(99).size() == 2);
}

TEST_CASE("label space indices are a bijection") {
    LabelSpace ls;
    for (int i = 0; i < 12; ++i) ls.labels.push_back({"vendor", "model-" + std::to_string(i)});
    ls.validate();
    for (std::size_t i = 0; i < ls.size(); ++i)
        CHECK(ls.index_of(ls.labels[i]) == static_cast<int>(i));
    CHECK(ls.index_of({"vendor", "absent"}) == -1);

    ls.labels.push_back(ls.labels[3]);
    CHECK_THROWS_AS(ls.validate(), std::invalid_argument);
}

TEST_CASE("utf8 truncation never splits a code point") {
    std::string s = "aé世x";  // 1-, 2-, 3-, 1-byte chars
    CHECK(utf8_truncate(s, 0) == "");
    CHECK(utf8_truncate(s, 1) == "a");
    CHECK(utf8_truncate(s, 2) == "aé");
    CHECK(utf8_truncate(s, 3) == "aé世");
    CHECK(utf8_truncate(s, 4) == s);
    CHECK(utf8_truncate(s, 99) == s);
}

TEST_CASE("base64 round-trips binary data") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::uint8_t> data(rng.uniform_int(64));
        for (auto& b : data) b = static_cast<std::uint8_t>(rng.uniform_int(256));
        std::string enc = base64_encode(data.data(), data.size());
        CHECK(base64_decode(enc) == data);
    }
    CHECK_THROWS_AS(base64_decode("a!b"), std::invalid_argument);
}
