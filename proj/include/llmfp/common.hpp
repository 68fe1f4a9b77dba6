#pragma once

// Shared utilities: errors, deterministic RNG, digests, base64, UTF-8 helpers.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace llmfp {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Errors

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t record_index)
        : std::runtime_error("record " + std::to_string(record_index) + ": " + msg),
          record_index_(record_index) {}
    std::size_t record_index() const { return record_index_; }

private:
    std::size_t record_index_;
};

class DimensionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    DimensionError(const std::string& what, long expected, long actual)
        : std::runtime_error(what + ": expected " + std::to_string(expected) +
                             ", got " + std::to_string(actual)) {}
};

class AuthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FingerprintMismatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ModeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// FNV-1a 64-bit digest. Stable across platforms; used for config digests,
// checkpoint fingerprints and cache keys.

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

inline std::string digest_hex(std::string_view bytes) { return hex64(fnv1a64(bytes)); }

// ---------------------------------------------------------------------------
// Deterministic RNG. std::mt19937_64 is fully specified by the standard, but
// the std distributions are not; we provide explicit draws so that seeded
// runs produce identical streams on every platform/compiler.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        // splitmix64; tiny, seedable, well distributed
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi]
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) { return n ? next_u64() % n : 0; }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; one value per call, deterministic
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(uniform_int(v.size()))];
    }

private:
    std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Base64 (RFC 4648, with padding)

std::string base64_encode(const void* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// ---------------------------------------------------------------------------
// UTF-8: truncate to at most max_chars code points, never splitting a
// multi-byte sequence.

std::string utf8_truncate(std::string_view text, std::size_t max_chars);

}  // namespace llmfp
