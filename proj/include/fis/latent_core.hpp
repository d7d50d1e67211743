#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "fis/errors.hpp"
#include "fis/tensor.hpp"

namespace fis {

// Select the anchor frames of x, preserving each frame's spatial token grid.
// Each selected frame is one contiguous memcpy, never per-token indexing, so
// downstream compute sees an ordinary dense (smaller) sequence.
inline LatentSequence gather(const LatentSequence& x, const FrameIndexSet& anchors) {
    if (anchors.empty()) {
        throw std::invalid_argument("gather: anchor set is empty");
    }
    if (anchors.frames_total != x.frames) {
        throw contract_error("gather: anchor set built for " +
                             std::to_string(anchors.frames_total) +
                             " frames, sequence has " + std::to_string(x.frames));
    }
    LatentSequence out(static_cast<std::uint32_t>(anchors.count()), x.height, x.width,
                       x.channels);
    const std::size_t fs = x.frame_size();
    for (std::size_t j = 0; j < anchors.count(); ++j) {
        std::memcpy(out.frame_ptr(static_cast<std::uint32_t>(j)),
                    x.frame_ptr(anchors.indices[j]), fs * sizeof(float));
    }
    return out;
}

// Interpolation weights for a skipped frame f_u strictly between anchors
// f_a < f_u < f_b. Computed in double so large frame counts do not drift.
struct InterpWeights {
    double on_left;
    double on_right;
};

inline InterpWeights interp_weights(std::uint32_t f_a, std::uint32_t f_u, std::uint32_t f_b) {
    const double span = static_cast<double>(f_b) - static_cast<double>(f_a);
    return {(static_cast<double>(f_b) - static_cast<double>(f_u)) / span,
            (static_cast<double>(f_u) - static_cast<double>(f_a)) / span};
}

// Rebuild the full frame sequence from anchor outputs: anchor frames are exact
// copies, every skipped frame is the convex blend of its two bracketing
// anchors. Anchors must include frame 0 and frame frames_total-1; one-sided
// extrapolation is deliberately unsupported.
inline LatentSequence reconstruct(const LatentSequence& y_anc, const FrameIndexSet& anchors,
                                  std::uint32_t frames_total) {
    if (frames_total < 1) {
        throw std::invalid_argument("reconstruct: frames_total must be >= 1");
    }
    if (anchors.frames_total != frames_total) {
        throw contract_error("reconstruct: anchor set built for " +
                             std::to_string(anchors.frames_total) +
                             " frames, requested " + std::to_string(frames_total));
    }
    if (y_anc.frames != anchors.count()) {
        throw std::invalid_argument("reconstruct: anchor output has " +
                                    std::to_string(y_anc.frames) + " frames, anchor set has " +
                                    std::to_string(anchors.count()));
    }
    if (!anchors.has_boundaries()) {
        throw std::invalid_argument(
            "reconstruct: anchor set must contain frames 0 and " +
            std::to_string(frames_total - 1));
    }

    LatentSequence out(frames_total, y_anc.height, y_anc.width, y_anc.channels);
    const std::size_t fs = out.frame_size();

    std::size_t j = 0;  // left bracketing anchor
    for (std::uint32_t f = 0; f < frames_total; ++f) {
        while (j + 1 < anchors.count() && anchors.indices[j + 1] <= f) ++j;
        if (anchors.indices[j] == f) {
            std::memcpy(out.frame_ptr(f), y_anc.frame_ptr(static_cast<std::uint32_t>(j)),
                        fs * sizeof(float));
            continue;
        }
        const std::uint32_t f_a = anchors.indices[j];
        const std::uint32_t f_b = anchors.indices[j + 1];
        const InterpWeights w = interp_weights(f_a, f, f_b);
        const float* left = y_anc.frame_ptr(static_cast<std::uint32_t>(j));
        const float* right = y_anc.frame_ptr(static_cast<std::uint32_t>(j + 1));
        float* dst = out.frame_ptr(f);
        for (std::size_t i = 0; i < fs; ++i) {
            dst[i] = static_cast<float>(w.on_left * static_cast<double>(left[i]) +
                                        w.on_right * static_cast<double>(right[i]));
        }
    }
    return out;
}

// Euclidean norm of the elementwise difference over the whole tensor.
inline double frame_l2_distance(const LatentSequence& a, const LatentSequence& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("frame_l2_distance: shape mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

inline double max_abs_diff(const LatentSequence& a, const LatentSequence& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("max_abs_diff: shape mismatch");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a.data[i]) -
                                 static_cast<double>(b.data[i])));
    }
    return m;
}

}  // namespace fis
