#pragma once

#include <cmath>
#include <cstdint>

namespace fis {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Counter-based pseudo-random stream: draw i of stream (seed, stream) is
// mix64(seed', gamma*i), independent of call history. Chosen over
// std::mt19937 so the sequence is pinned by this file alone and can be
// regenerated bit-identically from (seed, stream, i) anywhere.
class CounterRng {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(mix64(seed + kGamma * (stream + 1))) {}

    std::uint64_t next_u64() { return mix64(key_ + kGamma * ++counter_); }

    // [0, 1)
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float next_uniform(float lo, float hi) {
        return static_cast<float>(lo + (hi - lo) * next_unit());
    }

    // Box-Muller in double, truncated to float. Hand-rolled because
    // std::normal_distribution is not pinned across standard libraries.
    float next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = static_cast<float>(r * std::sin(theta));
        have_spare_ = true;
        return static_cast<float>(r * std::cos(theta));
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    float spare_ = 0.0f;
    bool have_spare_ = false;
};

}  // namespace fis
