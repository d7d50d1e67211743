#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "fis/errors.hpp"
#include "fis/tensor.hpp"

namespace fis {

// Sparse execution policy: which blocks may run on anchor frames only, how
// anchors are strided across frames, and which final denoising steps stay
// dense. Blocks outside sensitive_blocks form the "middle" set eligible for
// sparsity; the anchor ratio kappa = 1/stride_n is derived, never supplied.
struct SparsityConfig {
    int stride_n = 3;
    int blocks_total = 12;
    int steps_total = 4;
    std::vector<int> sensitive_blocks;  // sorted unique, each in [0, blocks_total)
    int tail_steps = 1;                 // final steps forced dense, in [0, steps_total]
    bool interleave = true;             // false: every block reuses offset 0

    double anchor_ratio() const { return 1.0 / static_cast<double>(stride_n); }

    bool is_sensitive(int l) const {
        return std::binary_search(sensitive_blocks.begin(), sensitive_blocks.end(), l);
    }

    std::vector<int> middle_blocks() const {
        std::vector<int> m;
        m.reserve(static_cast<std::size_t>(blocks_total));
        for (int l = 0; l < blocks_total; ++l) {
            if (!is_sensitive(l)) m.push_back(l);
        }
        return m;
    }

    // Lowest block index eligible for sparsity.
    int first_sparse_block() const {
        for (int l = 0; l < blocks_total; ++l) {
            if (!is_sensitive(l)) return l;
        }
        throw config_error("sparsity: middle-block set is empty");
    }

    void validate() const {
        if (stride_n < 1) throw config_error("sparsity: stride_n must be >= 1");
        if (blocks_total < 1) throw config_error("sparsity: blocks_total must be >= 1");
        if (steps_total < 1) throw config_error("sparsity: steps_total must be >= 1");
        if (tail_steps < 0 || tail_steps > steps_total) {
            throw config_error("sparsity: tail_steps must be in [0, steps_total]");
        }
        for (std::size_t i = 0; i < sensitive_blocks.size(); ++i) {
            const int l = sensitive_blocks[i];
            if (l < 0 || l >= blocks_total) {
                throw config_error("sparsity: sensitive block " + std::to_string(l) +
                                   " out of range [0, " + std::to_string(blocks_total) + ")");
            }
            if (i > 0 && l <= sensitive_blocks[i - 1]) {
                throw config_error("sparsity: sensitive_blocks must be strictly increasing");
            }
        }
    }
};

// Offset of the anchor congruence class for middle block l. Consecutive
// middle blocks rotate through offsets 0..n-1, so with stride n every frame
// is recomputed exactly once per n consecutive middle blocks.
inline int anchor_offset(int l, const SparsityConfig& cfg) {
    if (l < 0 || l >= cfg.blocks_total) {
        throw std::invalid_argument("anchor_offset: block " + std::to_string(l) +
                                    " out of range");
    }
    if (cfg.is_sensitive(l)) {
        throw std::invalid_argument("anchor_offset: block " + std::to_string(l) +
                                    " is sensitive, not scheduled");
    }
    if (!cfg.interleave) return 0;
    return (l - cfg.first_sparse_block()) % cfg.stride_n;
}

// Anchor frames for offset r: the congruence class {f : f == r (mod n)}
// plus both boundary frames, which lack two-sided context for interpolation.
inline FrameIndexSet anchor_set(std::uint32_t frames_total, int n, int r) {
    if (frames_total < 2) {
        throw std::invalid_argument("anchor_set: frames_total must be >= 2");
    }
    if (n < 1 || r < 0 || r >= n) {
        throw std::invalid_argument("anchor_set: offset " + std::to_string(r) +
                                    " not in [0, " + std::to_string(n) + ")");
    }
    std::vector<std::uint32_t> idx;
    idx.reserve(frames_total / static_cast<std::uint32_t>(n) + 2);
    idx.push_back(0);
    for (std::uint32_t f = static_cast<std::uint32_t>(r); f < frames_total;
         f += static_cast<std::uint32_t>(n)) {
        if (f != 0 && f != frames_total - 1) idx.push_back(f);
    }
    idx.push_back(frames_total - 1);
    return FrameIndexSet(frames_total, std::move(idx));
}

// Per-middle-block anchor assignment for one frame count.
struct AnchorSchedule {
    struct Entry {
        int offset = 0;
        FrameIndexSet anchors;
    };

    std::uint32_t frames_total = 0;
    std::map<int, Entry> blocks;  // middle block index -> entry

    bool scheduled(int l) const { return blocks.count(l) != 0; }

    const Entry& entry(int l) const {
        auto it = blocks.find(l);
        if (it == blocks.end()) {
            throw contract_error("schedule: block " + std::to_string(l) +
                                 " has no anchor set");
        }
        return it->second;
    }
};

inline AnchorSchedule build_schedule(std::uint32_t frames_total, const SparsityConfig& cfg) {
    cfg.validate();
    if (frames_total < 2) {
        throw std::invalid_argument("build_schedule: frames_total must be >= 2");
    }
    const std::vector<int> middle = cfg.middle_blocks();
    if (middle.empty()) {
        throw config_error("build_schedule: middle-block set is empty");
    }
    AnchorSchedule schedule;
    schedule.frames_total = frames_total;
    for (int l : middle) {
        const int r = anchor_offset(l, cfg);
        schedule.blocks.emplace(l,
                                AnchorSchedule::Entry{r, anchor_set(frames_total, cfg.stride_n, r)});
    }
    return schedule;
}

// True: run block l at step t on anchor frames only (sparse path).
// False: full-frame computation. Steps are zero-based; the last tail_steps
// steps and every sensitive block stay dense.
inline bool gate(int l, int t, const SparsityConfig& cfg) {
    if (l < 0 || l >= cfg.blocks_total) {
        throw std::invalid_argument("gate: block " + std::to_string(l) + " out of range");
    }
    if (t < 0 || t >= cfg.steps_total) {
        throw std::invalid_argument("gate: step " + std::to_string(t) + " out of range");
    }
    return !cfg.is_sensitive(l) && t < cfg.steps_total - cfg.tail_steps;
}

}  // namespace fis
