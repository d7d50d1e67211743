#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fis/errors.hpp"
#include "fis/latent_core.hpp"
#include "fis/rng.hpp"
#include "fis/scheduler.hpp"
#include "fis/tensor.hpp"

namespace fis {

struct ToyDiTConfig {
    int blocks_total = 12;
    int model_dim = 64;
    int heads = 4;
    int ffn_expansion = 4;
    std::uint32_t frames = 16;
    std::uint32_t spatial = 8;  // height == width
    int steps_total = 4;
    std::uint64_t weight_seed = 42;

    void validate() const {
        if (blocks_total < 1 || model_dim < 1 || heads < 1 || ffn_expansion < 1 ||
            frames < 1 || spatial < 1 || steps_total < 1) {
            throw config_error("toy config: every count must be >= 1");
        }
        if (model_dim % heads != 0) {
            throw config_error("toy config: model_dim must be divisible by heads");
        }
    }

    std::uint64_t tokens_per_frame() const {
        return static_cast<std::uint64_t>(spatial) * spatial;
    }
    std::uint64_t dense_tokens() const { return frames * tokens_per_frame(); }
};

// One transformer block's parameters, regenerated bit-identically from
// (weight_seed, block index). Values uniform in [-1/sqrt(D), +1/sqrt(D)].
struct BlockWeights {
    int model_dim = 0;
    int heads = 0;
    int ffn_dim = 0;
    std::vector<float> w_q, w_k, w_v, w_o;  // D x D, row-major (in, out)
    std::vector<float> w_ffn_in;            // D x ffn_dim
    std::vector<float> w_ffn_out;           // ffn_dim x D
    std::vector<float> attn_scale, attn_shift;  // length D
    std::vector<float> ffn_scale, ffn_shift;    // length D
};

inline BlockWeights make_block_weights(std::uint64_t weight_seed, int block, int model_dim,
                                       int heads, int ffn_expansion) {
    BlockWeights w;
    w.model_dim = model_dim;
    w.heads = heads;
    w.ffn_dim = model_dim * ffn_expansion;
    CounterRng rng(weight_seed, static_cast<std::uint64_t>(block));
    const float bound = 1.0f / std::sqrt(static_cast<float>(model_dim));
    auto fill = [&](std::vector<float>& vec, std::size_t count) {
        vec.resize(count);
        for (float& val : vec) val = rng.next_uniform(-bound, bound);
    };
    const std::size_t dd = static_cast<std::size_t>(model_dim) * model_dim;
    fill(w.w_q, dd);
    fill(w.w_k, dd);
    fill(w.w_v, dd);
    fill(w.w_o, dd);
    fill(w.w_ffn_in, static_cast<std::size_t>(model_dim) * w.ffn_dim);
    fill(w.w_ffn_out, static_cast<std::size_t>(w.ffn_dim) * model_dim);
    fill(w.attn_scale, static_cast<std::size_t>(model_dim));
    fill(w.attn_shift, static_cast<std::size_t>(model_dim));
    fill(w.ffn_scale, static_cast<std::size_t>(model_dim));
    fill(w.ffn_shift, static_cast<std::size_t>(model_dim));
    return w;
}

struct LedgerRow {
    int step = 0;
    int block = 0;
    bool gated = false;
    std::uint64_t token_count = 0;
    std::uint64_t attn_madds = 0;
    std::uint64_t ffn_madds = 0;
};

// Multiply-add accounting for dense vs. sparse execution. Counted totals are
// accumulated at matrix-multiply call sites only (softmax/LN/GELU element ops
// are excluded), so they can be checked exactly against the closed form.
struct FlopsLedger {
    std::uint64_t dense_madds = 0;   // counted over a dense run
    std::uint64_t sparse_madds = 0;  // counted over a sparse run
    std::uint64_t analytic_dense = 0;
    std::uint64_t analytic_sparse = 0;
    std::vector<LedgerRow> rows;  // one row per executed (step, block)

    double speedup() const {
        return analytic_sparse == 0
                   ? 0.0
                   : static_cast<double>(analytic_dense) / static_cast<double>(analytic_sparse);
    }
};

// c = a (m x k) * b (k x n), all row-major. Every model matmul goes through
// here; *madds is bumped by exactly m*k*n.
inline void matmul(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
                   std::size_t n, std::uint64_t* madds = nullptr) {
    if (madds) *madds += static_cast<std::uint64_t>(m) * k * n;
    std::fill(c, c + m * n, 0.0f);
    for (std::size_t i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        float* crow = c + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const float av = arow[l];
            const float* brow = b + l * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// Per-token layer norm (no learned parameters) followed by the conditioning
// modulation: y = ln(x) * (1 + scale*e) + shift*e, elementwise per channel.
// The embedding is shared across tokens, so conditioning never depends on the
// frame axis.
inline void norm_modulate(const float* x, float* y, std::size_t tokens, int dim,
                          const std::vector<float>& scale, const std::vector<float>& shift,
                          const std::vector<float>& t_embed) {
    for (std::size_t i = 0; i < tokens; ++i) {
        const float* row = x + i * dim;
        double mean = 0.0;
        for (int d = 0; d < dim; ++d) mean += row[d];
        mean /= dim;
        double var = 0.0;
        for (int d = 0; d < dim; ++d) {
            const double c = row[d] - mean;
            var += c * c;
        }
        var /= dim;
        const double inv = 1.0 / std::sqrt(var + 1e-5);
        float* out = y + i * dim;
        for (int d = 0; d < dim; ++d) {
            const float ln = static_cast<float>((row[d] - mean) * inv);
            out[d] = ln * (1.0f + scale[d] * t_embed[d]) + shift[d] * t_embed[d];
        }
    }
}

inline float gelu(float v) {
    const float c = 0.7978845608028654f;  // sqrt(2/pi)
    return 0.5f * v * (1.0f + std::tanh(c * (v + 0.044715f * v * v * v)));
}

// Sinusoidal embedding of the noise level, length dim.
inline std::vector<float> timestep_embedding(double sigma, int dim) {
    std::vector<float> e(static_cast<std::size_t>(dim));
    const int half = (dim + 1) / 2;
    const double t = sigma * 1000.0;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / std::max(half - 1, 1));
        e[i] = static_cast<float>(std::sin(t * freq));
        if (half + i < dim) e[half + i] = static_cast<float>(std::cos(t * freq));
    }
    return e;
}

namespace detail {

inline void check_block_input(const LatentSequence& x, const BlockWeights& w,
                              const std::vector<float>& t_embed, const char* where) {
    if (x.channels != static_cast<std::uint32_t>(w.model_dim)) {
        throw std::invalid_argument(std::string(where) + ": input has " +
                                    std::to_string(x.channels) + " channels, block expects " +
                                    std::to_string(w.model_dim));
    }
    if (t_embed.size() != static_cast<std::size_t>(w.model_dim)) {
        throw std::invalid_argument(std::string(where) + ": conditioning length mismatch");
    }
}

}  // namespace detail

// Pre-residual attention sub-module update: Attn(mod(LN(x))) * W_o, full
// softmax attention over every token of the input sequence. A gathered input
// therefore attends among anchor-frame tokens only.
inline LatentSequence attention_update(const LatentSequence& x, const BlockWeights& w,
                                       const std::vector<float>& t_embed,
                                       std::uint64_t* madds = nullptr) {
    detail::check_block_input(x, w, t_embed, "attention_update");
    const int dim = w.model_dim;
    const std::size_t n_tok = x.token_count();
    const int hd = dim / w.heads;

    std::vector<float> h(n_tok * dim);
    norm_modulate(x.data.data(), h.data(), n_tok, dim, w.attn_scale, w.attn_shift, t_embed);

    std::vector<float> q(n_tok * dim), k(n_tok * dim), v(n_tok * dim);
    matmul(h.data(), w.w_q.data(), q.data(), n_tok, dim, dim, madds);
    matmul(h.data(), w.w_k.data(), k.data(), n_tok, dim, dim, madds);
    matmul(h.data(), w.w_v.data(), v.data(), n_tok, dim, dim, madds);

    std::vector<float> ctx(n_tok * dim);
    std::vector<float> qh(n_tok * hd), kt(static_cast<std::size_t>(hd) * n_tok),
        vh(n_tok * hd), ctxh(n_tok * hd);
    std::vector<float> scores(n_tok * n_tok);
    const float inv_sqrt_hd = 1.0f / std::sqrt(static_cast<float>(hd));

    for (int head = 0; head < w.heads; ++head) {
        const std::size_t c0 = static_cast<std::size_t>(head) * hd;
        for (std::size_t i = 0; i < n_tok; ++i) {
            for (int d = 0; d < hd; ++d) {
                qh[i * hd + d] = q[i * dim + c0 + d];
                vh[i * hd + d] = v[i * dim + c0 + d];
                kt[static_cast<std::size_t>(d) * n_tok + i] = k[i * dim + c0 + d];
            }
        }
        matmul(qh.data(), kt.data(), scores.data(), n_tok, hd, n_tok, madds);
        for (std::size_t i = 0; i < n_tok; ++i) {
            float* srow = scores.data() + i * n_tok;
            float peak = srow[0] * inv_sqrt_hd;
            for (std::size_t j = 0; j < n_tok; ++j) {
                srow[j] *= inv_sqrt_hd;
                peak = std::max(peak, srow[j]);
            }
            double sum = 0.0;
            for (std::size_t j = 0; j < n_tok; ++j) {
                srow[j] = std::exp(srow[j] - peak);
                sum += srow[j];
            }
            const float inv_sum = static_cast<float>(1.0 / sum);
            for (std::size_t j = 0; j < n_tok; ++j) srow[j] *= inv_sum;
        }
        matmul(scores.data(), vh.data(), ctxh.data(), n_tok, n_tok, hd, madds);
        for (std::size_t i = 0; i < n_tok; ++i) {
            for (int d = 0; d < hd; ++d) ctx[i * dim + c0 + d] = ctxh[i * hd + d];
        }
    }

    LatentSequence update(x.frames, x.height, x.width, x.channels);
    matmul(ctx.data(), w.w_o.data(), update.data.data(), n_tok, dim, dim, madds);
    return update;
}

// Pre-residual FFN sub-module update: W_2 * GELU(W_1 * mod(LN(x))), per token.
inline LatentSequence ffn_update(const LatentSequence& x, const BlockWeights& w,
                                 const std::vector<float>& t_embed,
                                 std::uint64_t* madds = nullptr) {
    detail::check_block_input(x, w, t_embed, "ffn_update");
    const int dim = w.model_dim;
    const std::size_t n_tok = x.token_count();

    std::vector<float> h(n_tok * dim);
    norm_modulate(x.data.data(), h.data(), n_tok, dim, w.ffn_scale, w.ffn_shift, t_embed);
    std::vector<float> f1(n_tok * static_cast<std::size_t>(w.ffn_dim));
    matmul(h.data(), w.w_ffn_in.data(), f1.data(), n_tok, dim, w.ffn_dim, madds);
    for (float& val : f1) val = gelu(val);
    LatentSequence update(x.frames, x.height, x.width, x.channels);
    matmul(f1.data(), w.w_ffn_out.data(), update.data.data(), n_tok, w.ffn_dim, dim, madds);
    return update;
}

// Pre-LN transformer block: x' = x + Attn(mod(LN(x))), out = x' + FFN(mod(LN(x'))).
inline LatentSequence block_forward(const LatentSequence& x, const BlockWeights& w,
                                    const std::vector<float>& t_embed,
                                    LedgerRow* row = nullptr) {
    std::uint64_t attn_madds = 0;
    std::uint64_t ffn_madds = 0;

    LatentSequence x1 = attention_update(x, w, t_embed, &attn_madds);
    for (std::size_t i = 0; i < x1.size(); ++i) x1.data[i] += x.data[i];

    LatentSequence out = ffn_update(x1, w, t_embed, &ffn_madds);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += x1.data[i];

    if (row) {
        row->token_count = x.token_count();
        row->attn_madds = attn_madds;
        row->ffn_madds = ffn_madds;
    }
    return out;
}

class ToyDiT {
public:
    explicit ToyDiT(const ToyDiTConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        blocks_.reserve(static_cast<std::size_t>(cfg.blocks_total));
        for (int l = 0; l < cfg.blocks_total; ++l) {
            blocks_.push_back(
                make_block_weights(cfg.weight_seed, l, cfg.model_dim, cfg.heads,
                                   cfg.ffn_expansion));
        }
    }

    const ToyDiTConfig& config() const { return cfg_; }
    const BlockWeights& block(int l) const { return blocks_.at(static_cast<std::size_t>(l)); }

private:
    ToyDiTConfig cfg_;
    std::vector<BlockWeights> blocks_;
};

// Sparsity is applied per sub-module: each of the two module updates is
// computed on anchor frames only and rebuilt over all frames, while the
// residual stream stays dense. Skipped frames keep their own state and
// accumulate interpolated updates; at block granularity (residual inside the
// gathered computation) a fixed schedule would simply overwrite skipped
// frames at each block and the error-accumulation contrast between fixed and
// interleaved scheduling disappears.
inline LatentSequence gated_block_apply(const LatentSequence& x, int l, int t,
                                        const AnchorSchedule& schedule,
                                        const SparsityConfig& cfg, const BlockWeights& w,
                                        const std::vector<float>& t_embed,
                                        LedgerRow* row = nullptr) {
    if (row) {
        row->step = t;
        row->block = l;
    }
    if (!gate(l, t, cfg)) {
        return block_forward(x, w, t_embed, row);
    }
    if (schedule.frames_total != x.frames) {
        throw contract_error("gated_block_apply: schedule built for " +
                             std::to_string(schedule.frames_total) + " frames, input has " +
                             std::to_string(x.frames));
    }
    const AnchorSchedule::Entry& entry = schedule.entry(l);
    std::uint64_t attn_madds = 0;
    std::uint64_t ffn_madds = 0;

    const LatentSequence x_anc = gather(x, entry.anchors);
    LatentSequence x1 =
        reconstruct(attention_update(x_anc, w, t_embed, &attn_madds), entry.anchors, x.frames);
    for (std::size_t i = 0; i < x1.size(); ++i) x1.data[i] += x.data[i];

    const LatentSequence x1_anc = gather(x1, entry.anchors);
    LatentSequence out =
        reconstruct(ffn_update(x1_anc, w, t_embed, &ffn_madds), entry.anchors, x.frames);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += x1.data[i];

    if (row) {
        row->gated = true;
        row->token_count = x_anc.token_count();
        row->attn_madds = attn_madds;
        row->ffn_madds = ffn_madds;
    }
    return out;
}

// Closed-form multiply-add count of one block application on `tokens` tokens:
// attention projections 4*N*D^2, scores + weighted sum 2*N^2*D, FFN 2*N*D*E.
struct BlockCost {
    std::uint64_t attn = 0;
    std::uint64_t ffn = 0;
    std::uint64_t total() const { return attn + ffn; }
};

inline BlockCost block_cost(std::uint64_t tokens, int model_dim, int ffn_expansion) {
    const std::uint64_t d = static_cast<std::uint64_t>(model_dim);
    const std::uint64_t e = d * static_cast<std::uint64_t>(ffn_expansion);
    BlockCost c;
    c.attn = 4 * tokens * d * d + 2 * tokens * tokens * d;
    c.ffn = tokens * d * e + tokens * e * d;
    return c;
}

// Validates the sparsity grid against the model and builds the anchor
// schedule, or nullopt when no block can ever be gated.
inline std::optional<AnchorSchedule> plan_schedule(const ToyDiTConfig& cfg,
                                                   const std::optional<SparsityConfig>& sp) {
    if (!sp) return std::nullopt;
    sp->validate();
    if (sp->blocks_total != cfg.blocks_total || sp->steps_total != cfg.steps_total) {
        throw config_error("sparsity grid (blocks_total=" + std::to_string(sp->blocks_total) +
                           ", steps_total=" + std::to_string(sp->steps_total) +
                           ") does not match the model");
    }
    if (sp->middle_blocks().empty()) return std::nullopt;
    return build_schedule(cfg.frames, *sp);
}

inline FlopsLedger analytic_flops(const ToyDiTConfig& cfg,
                                  const std::optional<SparsityConfig>& sparsity) {
    cfg.validate();
    FlopsLedger ledger;
    const std::uint64_t n_dense = cfg.dense_tokens();
    const std::uint64_t per_block = block_cost(n_dense, cfg.model_dim, cfg.ffn_expansion).total();
    ledger.analytic_dense = static_cast<std::uint64_t>(cfg.steps_total) *
                            static_cast<std::uint64_t>(cfg.blocks_total) * per_block;
    const std::optional<AnchorSchedule> schedule = plan_schedule(cfg, sparsity);
    if (!schedule) {
        ledger.analytic_sparse = ledger.analytic_dense;
        return ledger;
    }
    for (int t = 0; t < cfg.steps_total; ++t) {
        for (int l = 0; l < cfg.blocks_total; ++l) {
            const bool sparse = gate(l, t, *sparsity);
            const std::uint64_t tokens =
                sparse ? schedule->entry(l).anchors.count() * cfg.tokens_per_frame() : n_dense;
            ledger.analytic_sparse +=
                block_cost(tokens, cfg.model_dim, cfg.ffn_expansion).total();
        }
    }
    return ledger;
}

struct DenoiseResult {
    LatentSequence latent;
    FlopsLedger ledger;
};

using ProbeFn = std::function<void(int step, int block, const LatentSequence&)>;

// Few-step Euler sampler over a linear sigma schedule from 1 to 0:
// z <- z - (sigma_t - sigma_{t+1}) * model(z, t). Single-threaded and
// sequential over (t, l) so ledger row order is deterministic.
inline DenoiseResult denoise(const LatentSequence& init_noise, const ToyDiT& model,
                             const std::optional<SparsityConfig>& sparsity = std::nullopt,
                             const ProbeFn& probe = {}) {
    const ToyDiTConfig& cfg = model.config();
    if (init_noise.frames != cfg.frames || init_noise.height != cfg.spatial ||
        init_noise.width != cfg.spatial ||
        init_noise.channels != static_cast<std::uint32_t>(cfg.model_dim)) {
        throw std::invalid_argument("denoise: init noise shape does not match the model");
    }
    const std::optional<AnchorSchedule> schedule = plan_schedule(cfg, sparsity);

    DenoiseResult result;
    result.ledger = analytic_flops(cfg, sparsity);
    result.ledger.rows.reserve(static_cast<std::size_t>(cfg.steps_total) * cfg.blocks_total);
    std::uint64_t counted = 0;

    LatentSequence z = init_noise;
    const int steps = cfg.steps_total;
    for (int t = 0; t < steps; ++t) {
        const double sigma_t = 1.0 - static_cast<double>(t) / steps;
        const double sigma_next = 1.0 - static_cast<double>(t + 1) / steps;
        const std::vector<float> t_embed = timestep_embedding(sigma_t, cfg.model_dim);

        LatentSequence h = z;
        for (int l = 0; l < cfg.blocks_total; ++l) {
            LedgerRow row;
            row.step = t;
            row.block = l;
            if (schedule) {
                h = gated_block_apply(h, l, t, *schedule, *sparsity, model.block(l), t_embed,
                                      &row);
            } else {
                h = block_forward(h, model.block(l), t_embed, &row);
            }
            counted += row.attn_madds + row.ffn_madds;
            result.ledger.rows.push_back(row);
            if (probe) probe(t, l, h);
        }

        const float step_size = static_cast<float>(sigma_t - sigma_next);
        for (std::size_t i = 0; i < z.size(); ++i) z.data[i] -= step_size * h.data[i];
    }

    if (sparsity) {
        result.ledger.sparse_madds = counted;
    } else {
        result.ledger.dense_madds = counted;
    }
    result.latent = std::move(z);
    return result;
}

}  // namespace fis
