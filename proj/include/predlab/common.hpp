#pragma once

#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace predlab {

inline constexpr const char* kVersion = "predlab-0.1";

// Log base for reported losses and entropies. Everything internal is nats.
enum class LogBase { nats, bits };

inline double from_nats(double nats, LogBase base) {
    return base == LogBase::nats ? nats : nats / std::numbers::ln2;
}

// Probability floor applied before taking logs; keeps deterministic
// predictions evaluable without infinities.
inline constexpr double kProbFloor = 1e-12;

// Enumeration refuses state spaces larger than this unless overridden.
inline constexpr long long kDefaultEnumBudget = 1LL << 24;

// Error taxonomy, mapped onto CLI exit codes (2/3/4).
struct SpecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; used to derive independent seeds from one seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n).
inline std::uint64_t uniform_below(std::mt19937_64& g, std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform01(g) * static_cast<double>(n)) % n;
}

}  // namespace predlab
