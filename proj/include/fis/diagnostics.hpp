#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fis/errors.hpp"
#include "fis/rng.hpp"
#include "fis/tensor.hpp"

namespace fis {

// Spatial map of per-location channel norms for one frame.
struct MagnitudeMap {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<double> values;  // H*W, nonnegative

    double frobenius() const {
        double acc = 0.0;
        for (double v : values) acc += v * v;
        return std::sqrt(acc);
    }
};

namespace detail {

inline MagnitudeMap frame_magnitude(const LatentSequence& x, std::uint32_t frame) {
    MagnitudeMap m;
    m.height = x.height;
    m.width = x.width;
    m.values.resize(static_cast<std::size_t>(x.height) * x.width);
    const float* p = x.frame_ptr(frame);
    const std::size_t d = x.channels;
    for (std::size_t loc = 0; loc < m.values.size(); ++loc) {
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double v = p[loc * d + c];
            acc += v * v;
        }
        m.values[loc] = std::sqrt(acc);
    }
    return m;
}

inline double map_distance(const MagnitudeMap& a, const MagnitudeMap& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace detail

inline MagnitudeMap magnitude_map(const LatentSequence& x_frame) {
    if (x_frame.frames != 1) {
        throw std::invalid_argument("magnitude_map: expected a single frame, got " +
                                    std::to_string(x_frame.frames));
    }
    return detail::frame_magnitude(x_frame, 0);
}

// Adjacent-frame changes of the magnitude maps: abs_i = ||V_{i+1} - V_i||,
// rel_i = abs_i / ||V_i||. Frames whose map norm is zero cannot be
// normalized; their rel entry is left 0 and the index is reported in
// guard_frames while abs is still returned.
struct AdjacentChanges {
    std::vector<double> abs_change;           // F-1
    std::vector<double> rel_change;           // F-1
    std::vector<std::uint32_t> guard_frames;  // i with ||V_i|| == 0
};

inline AdjacentChanges adjacent_changes(const LatentSequence& x) {
    if (x.frames < 2) {
        throw std::invalid_argument("adjacent_changes: need at least 2 frames");
    }
    AdjacentChanges out;
    out.abs_change.resize(x.frames - 1);
    out.rel_change.resize(x.frames - 1);
    MagnitudeMap prev = detail::frame_magnitude(x, 0);
    for (std::uint32_t i = 0; i + 1 < x.frames; ++i) {
        MagnitudeMap next = detail::frame_magnitude(x, i + 1);
        const double abs = detail::map_distance(next, prev);
        const double norm = prev.frobenius();
        out.abs_change[i] = abs;
        if (norm == 0.0) {
            out.guard_frames.push_back(i);
            out.rel_change[i] = 0.0;
        } else {
            out.rel_change[i] = abs / norm;
        }
        prev = std::move(next);
    }
    return out;
}

struct CurveKey {
    int block = 0;
    int step = 0;
    int prompt = 0;
    auto operator<=>(const CurveKey&) const = default;
};

using CurveSet = std::map<CurveKey, std::vector<double>>;
using CvMatrix = std::map<std::pair<int, int>, double>;  // (block, step) -> mean CV

// Coefficient of variation of one change curve: mean and population standard
// deviation over its F-1 entries. A flat (all equal) curve has CV 0; an
// all-zero curve is defined as CV 0; zero mean with positive spread cannot
// arise from nonnegative inputs and maps to an infinite sentinel.
inline double curve_cv(const std::vector<double>& curve) {
    if (curve.size() < 2) {
        throw std::invalid_argument("curve_cv: need at least 2 entries, got " +
                                    std::to_string(curve.size()));
    }
    double mean = 0.0;
    for (double v : curve) mean += v;
    mean /= static_cast<double>(curve.size());
    double var = 0.0;
    for (double v : curve) {
        const double c = v - mean;
        var += c * c;
    }
    var /= static_cast<double>(curve.size());
    const double sd = std::sqrt(var);
    if (mean == 0.0) {
        return sd == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return sd / mean;
}

// Per-(block, step) mean CV over prompts.
inline CvMatrix cv_stats(const CurveSet& curves) {
    std::map<std::pair<int, int>, std::pair<double, int>> acc;  // sum, count
    for (const auto& [key, curve] : curves) {
        auto& slot = acc[{key.block, key.step}];
        slot.first += curve_cv(curve);
        slot.second += 1;
    }
    CvMatrix out;
    for (const auto& [cell, slot] : acc) {
        out[cell] = slot.first / slot.second;
    }
    return out;
}

// Per-frame relative error of a sparse run against the dense oracle, measured
// on the magnitude maps of the two outputs.
inline std::vector<double> per_frame_error(const LatentSequence& dense,
                                           const LatentSequence& sparse) {
    if (!dense.same_shape(sparse)) {
        throw std::invalid_argument("per_frame_error: shape mismatch");
    }
    std::vector<double> errors(dense.frames);
    for (std::uint32_t f = 0; f < dense.frames; ++f) {
        const MagnitudeMap v = detail::frame_magnitude(dense, f);
        const MagnitudeMap v_hat = detail::frame_magnitude(sparse, f);
        const double norm = v.frobenius();
        if (norm == 0.0) {
            throw std::domain_error("per_frame_error: dense frame " + std::to_string(f) +
                                    " has zero magnitude-map norm");
        }
        errors[f] = detail::map_distance(v_hat, v) / norm;
    }
    return errors;
}

struct DiagnosticsReport {
    CurveSet rel_change_curves;
    CvMatrix cv_matrix;
    std::vector<double> per_frame_errors;
    std::map<std::string, std::string> metadata;

    void validate() const {
        for (const auto& [key, curve] : rel_change_curves) {
            for (std::size_t i = 0; i < curve.size(); ++i) {
                if (!(curve[i] >= 0.0) || !std::isfinite(curve[i])) {
                    throw diagnostic_error("report: rel change (" + std::to_string(key.block) +
                                           "," + std::to_string(key.step) + "," +
                                           std::to_string(key.prompt) + ")[" +
                                           std::to_string(i) + "] is invalid");
                }
            }
        }
        for (const auto& [cell, cv] : cv_matrix) {
            if (!(cv >= 0.0)) {
                throw diagnostic_error("report: CV at (" + std::to_string(cell.first) + "," +
                                       std::to_string(cell.second) + ") is negative");
            }
        }
        for (std::size_t f = 0; f < per_frame_errors.size(); ++f) {
            if (!(per_frame_errors[f] >= 0.0) || !std::isfinite(per_frame_errors[f])) {
                throw diagnostic_error("report: per-frame error [" + std::to_string(f) +
                                       "] is invalid");
            }
        }
    }
};

struct SyntheticProbeConfig {
    std::uint64_t seed = 0x51D5EEDull;
    std::uint32_t frames = 16;
    std::uint32_t height = 8;
    std::uint32_t width = 8;
    std::uint32_t channels = 16;
    float base_scale = 1.0f;    // A ~ U[-base_scale, base_scale]
    float drift_scale = 1e-3f;  // B ~ U[-drift_scale, drift_scale]
    double flatness_tol = 0.05;
    double cv_limit = 0.05;
};

// Validation harness: builds the frame-linear sequence X_i = A + i*B and
// checks that its relative-change curve is flat (interior deviation within
// flatness_tol of the mean) with CV below cv_limit.
inline DiagnosticsReport synthetic_probe(const SyntheticProbeConfig& cfg = {}) {
    LatentSequence x(cfg.frames, cfg.height, cfg.width, cfg.channels);
    const std::size_t fs = x.frame_size();
    std::vector<float> base(fs), drift(fs);
    CounterRng rng_a(cfg.seed, 0);
    CounterRng rng_b(cfg.seed, 1);
    for (std::size_t i = 0; i < fs; ++i) {
        base[i] = rng_a.next_uniform(-cfg.base_scale, cfg.base_scale);
        drift[i] = rng_b.next_uniform(-cfg.drift_scale, cfg.drift_scale);
    }
    for (std::uint32_t f = 0; f < cfg.frames; ++f) {
        float* dst = x.frame_ptr(f);
        for (std::size_t i = 0; i < fs; ++i) {
            dst[i] = base[i] + static_cast<float>(f) * drift[i];
        }
    }

    const AdjacentChanges changes = adjacent_changes(x);
    const double cv = curve_cv(changes.rel_change);

    double mean = 0.0;
    for (double v : changes.rel_change) mean += v;
    mean /= static_cast<double>(changes.rel_change.size());

    std::string offending;
    for (std::size_t i = 1; i + 1 < changes.rel_change.size(); ++i) {
        if (std::abs(changes.rel_change[i] - mean) > cfg.flatness_tol * mean) {
            offending += (offending.empty() ? "" : ", ") + std::to_string(i);
        }
    }
    if (!offending.empty()) {
        throw diagnostic_error("synthetic probe: rel-change deviation above " +
                               std::to_string(cfg.flatness_tol * 100.0) +
                               "% of mean at indices " + offending);
    }
    if (!(cv <= cfg.cv_limit)) {
        throw diagnostic_error("synthetic probe: CV " + std::to_string(cv) + " exceeds " +
                               std::to_string(cfg.cv_limit));
    }

    DiagnosticsReport report;
    report.rel_change_curves[{0, 0, 0}] = changes.rel_change;
    report.cv_matrix[{0, 0}] = cv;
    report.metadata["probe"] = "synthetic_linear_drift";
    report.metadata["frames"] = std::to_string(cfg.frames);
    report.metadata["drift_scale"] = std::to_string(cfg.drift_scale);
    report.metadata["mean_rel_change"] = std::to_string(mean);
    report.validate();
    return report;
}

}  // namespace fis
