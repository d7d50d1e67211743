// Test-only reference implementations. Each oracle takes the naive route
// (per-element indexing, long-double Kahan accumulation, brute-force
// enumeration) and stays independent of the library code paths it checks.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fis/tensor.hpp"

namespace oracle {

// Frame selection by explicit per-element indexing.
inline fis::LatentSequence naive_gather(const fis::LatentSequence& x,
                                        const std::vector<std::uint32_t>& picks) {
    fis::LatentSequence out(static_cast<std::uint32_t>(picks.size()), x.height, x.width,
                            x.channels);
    for (std::uint32_t j = 0; j < out.frames; ++j) {
        for (std::uint32_t h = 0; h < x.height; ++h) {
            for (std::uint32_t w = 0; w < x.width; ++w) {
                for (std::uint32_t d = 0; d < x.channels; ++d) {
                    out.at(j, h, w, d) = x.at(picks[j], h, w, d);
                }
            }
        }
    }
    return out;
}

inline long double kahan_sum_sq_diff(const std::vector<float>& a, const std::vector<float>& b) {
    long double sum = 0.0L;
    long double comp = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const long double d = static_cast<long double>(a[i]) - static_cast<long double>(b[i]);
        const long double term = d * d - comp;
        const long double next = sum + term;
        comp = (next - sum) - term;
        sum = next;
    }
    return sum;
}

inline double kahan_l2_distance(const fis::LatentSequence& a, const fis::LatentSequence& b) {
    return static_cast<double>(std::sqrt(kahan_sum_sq_diff(a.data, b.data)));
}

// Channel-norm map via long-double accumulation, one value per (h, w).
inline std::vector<double> naive_magnitude(const fis::LatentSequence& x, std::uint32_t frame) {
    std::vector<double> map;
    map.reserve(static_cast<std::size_t>(x.height) * x.width);
    for (std::uint32_t h = 0; h < x.height; ++h) {
        for (std::uint32_t w = 0; w < x.width; ++w) {
            long double acc = 0.0L;
            for (std::uint32_t d = 0; d < x.channels; ++d) {
                const long double v = x.at(frame, h, w, d);
                acc += v * v;
            }
            map.push_back(static_cast<double>(std::sqrt(acc)));
        }
    }
    return map;
}

inline double map_frobenius(const std::vector<double>& m) {
    long double acc = 0.0L;
    for (double v : m) acc += static_cast<long double>(v) * v;
    return static_cast<double>(std::sqrt(acc));
}

inline double map_l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const long double d = static_cast<long double>(a[i]) - b[i];
        acc += d * d;
    }
    return static_cast<double>(std::sqrt(acc));
}

// Brute-force enumeration of the anchor congruence class plus boundaries,
// using mathematical mod rather than the stride-walk the library takes.
inline std::vector<std::uint32_t> enum_anchor_set(std::uint32_t frames_total, int n, int r) {
    std::vector<std::uint32_t> idx;
    for (std::uint32_t f = 0; f < frames_total; ++f) {
        const int rem = ((static_cast<int>(f) - r) % n + n) % n;
        if (rem == 0 || f == 0 || f == frames_total - 1) {
            idx.push_back(f);
        }
    }
    return idx;
}

}  // namespace oracle
