#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fracif {

// Counter-based generator: "splitmix64-counter v1".
//
// Draw i from stream s is mix(s + (i+1) * GAMMA) with the splitmix64
// finalizer, so any draw is addressable by (stream, counter) alone and the
// sequence is reproducible in any language from this description.
namespace rng {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Sub-stream rule: two mixing rounds over (seed, block id).
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t block_id) {
    return mix64(mix64(seed + kGamma) ^ (block_id + kGamma));
}

class CounterRng {
public:
    explicit CounterRng(std::uint64_t stream) : stream_(stream) {}

    std::uint64_t at(std::uint64_t i) const { return mix64(stream_ + (i + 1) * kGamma); }

    std::uint64_t next_u64() { return at(counter_++); }

    // uniform in [0, 1) from the top 53 bits
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

// All samplers below use CDF inversion on one uniform draw, which keeps the
// generated corpora portable: no rejection steps, no platform-dependent
// consumption of the stream.

inline std::uint32_t uniform_index(double u, std::uint32_t n) {
    auto k = static_cast<std::uint32_t>(u * n);
    return k >= n ? n - 1 : k;
}

// index into a cumulative weight table (strictly increasing, last = total)
inline std::size_t weighted_index(double u, const std::vector<double>& cumulative) {
    double target = u * cumulative.back();
    std::size_t lo = 0, hi = cumulative.size() - 1;
    while (lo < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (cumulative[mid] <= target)
            lo = mid + 1;
        else
            hi = mid;
    }
    return lo;
}

// Negative binomial with mean m and size (dispersion) r: variance m + m^2/r.
// pmf recurrence p_{k+1} = p_k * (k + r) / (k + 1) * (m / (r + m)).
inline std::uint32_t negative_binomial_inv(double u, double mean, double size) {
    if (mean <= 0.0 || size <= 0.0)
        throw std::invalid_argument("negative_binomial_inv: mean and size must be positive");
    const double ratio = mean / (size + mean);
    double pk = std::pow(1.0 - ratio, size);
    double cum = pk;
    std::uint32_t k = 0;
    const std::uint32_t cap = 1u << 24;
    while (cum <= u && k < cap) {
        pk *= (k + size) / (k + 1.0) * ratio;
        cum += pk;
        ++k;
    }
    return k;
}

}  // namespace rng
}  // namespace fracif
