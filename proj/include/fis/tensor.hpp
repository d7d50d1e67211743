#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fis/errors.hpp"
#include "fis/rng.hpp"

namespace fis {

// Video latent feature tensor. Dense row-major (frame, height, width, channel),
// so one frame is a contiguous slice of height*width*channels floats and the
// token view is (frames*height*width) rows of `channels` columns.
struct LatentSequence {
    std::uint32_t frames = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t channels = 0;
    std::vector<float> data;

    LatentSequence() = default;

    LatentSequence(std::uint32_t f, std::uint32_t h, std::uint32_t w, std::uint32_t d)
        : frames(f), height(h), width(w), channels(d) {
        if (f < 1 || h < 1 || w < 1 || d < 1) {
            throw std::invalid_argument("LatentSequence: every dimension must be >= 1");
        }
        data.assign(static_cast<std::size_t>(f) * h * w * d, 0.0f);
    }

    std::size_t frame_size() const {
        return static_cast<std::size_t>(height) * width * channels;
    }
    std::size_t token_count() const {
        return static_cast<std::size_t>(frames) * height * width;
    }
    std::size_t size() const { return data.size(); }

    float* frame_ptr(std::uint32_t f) { return data.data() + f * frame_size(); }
    const float* frame_ptr(std::uint32_t f) const { return data.data() + f * frame_size(); }

    float& at(std::uint32_t f, std::uint32_t h, std::uint32_t w, std::uint32_t d) {
        return data[((static_cast<std::size_t>(f) * height + h) * width + w) * channels + d];
    }
    float at(std::uint32_t f, std::uint32_t h, std::uint32_t w, std::uint32_t d) const {
        return data[((static_cast<std::size_t>(f) * height + h) * width + w) * channels + d];
    }

    bool same_shape(const LatentSequence& o) const {
        return frames == o.frames && height == o.height && width == o.width &&
               channels == o.channels;
    }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(),
                           [](float v) { return std::isfinite(v); });
    }
};

inline LatentSequence gaussian_latent(std::uint32_t f, std::uint32_t h, std::uint32_t w,
                                      std::uint32_t d, std::uint64_t seed,
                                      std::uint64_t stream = 0) {
    LatentSequence x(f, h, w, d);
    CounterRng rng(seed, stream);
    for (float& v : x.data) v = rng.next_gaussian();
    return x;
}

// Strictly increasing frame indices into a sequence of frames_total frames.
struct FrameIndexSet {
    std::uint32_t frames_total = 0;
    std::vector<std::uint32_t> indices;

    FrameIndexSet() = default;

    FrameIndexSet(std::uint32_t total, std::vector<std::uint32_t> idx)
        : frames_total(total), indices(std::move(idx)) {
        for (std::size_t i = 0; i < indices.size(); ++i) {
            if (indices[i] >= frames_total) {
                throw std::invalid_argument("FrameIndexSet: index " +
                                            std::to_string(indices[i]) +
                                            " out of range [0, " +
                                            std::to_string(frames_total) + ")");
            }
            if (i > 0 && indices[i] <= indices[i - 1]) {
                throw std::invalid_argument(
                    "FrameIndexSet: indices must be strictly increasing");
            }
        }
    }

    static FrameIndexSet full(std::uint32_t total) {
        std::vector<std::uint32_t> idx(total);
        for (std::uint32_t f = 0; f < total; ++f) idx[f] = f;
        return FrameIndexSet(total, std::move(idx));
    }

    std::size_t count() const { return indices.size(); }
    bool empty() const { return indices.empty(); }

    bool contains(std::uint32_t f) const {
        return std::binary_search(indices.begin(), indices.end(), f);
    }

    bool has_boundaries() const {
        return !indices.empty() && indices.front() == 0 &&
               indices.back() == frames_total - 1;
    }
};

}  // namespace fis
