#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>

namespace texforge {

// Seeded generator whose draws are defined here rather than by the standard
// library's distributions, so a seed means the same thing on every toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    // Uniform in [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1)); }
    // Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    bool bernoulli(double p) { return p >= 1.0 || (p > 0.0 && uniform01() < p); }

    template <typename T>
    const T& pick(std::span<const T> items) {
        if (items.empty()) throw std::invalid_argument("Rng::pick on empty range");
        return items[index(items.size())];
    }

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);
// Per-item seed; independent of processing order.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view item_id);
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stream, std::uint64_t index);

}  // namespace texforge
