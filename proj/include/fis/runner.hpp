#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fis/csv.hpp"
#include "fis/diagnostics.hpp"
#include "fis/errors.hpp"
#include "fis/lsq_io.hpp"
#include "fis/toy_dit.hpp"

namespace fis {

// Stream id for initial-noise draws, distinct from per-block weight streams.
constexpr std::uint64_t kNoiseStream = 0x6E6F6973ull;

inline LatentSequence sample_init_noise(const ToyDiTConfig& cfg, std::uint64_t seed) {
    return gaussian_latent(cfg.frames, cfg.spatial, cfg.spatial,
                           static_cast<std::uint32_t>(cfg.model_dim), seed, kNoiseStream);
}

inline nlohmann::json to_json(const ToyDiTConfig& c) {
    return nlohmann::json{{"blocks_total", c.blocks_total},
                          {"model_dim", c.model_dim},
                          {"heads", c.heads},
                          {"ffn_expansion", c.ffn_expansion},
                          {"frames", c.frames},
                          {"spatial", c.spatial},
                          {"steps_total", c.steps_total},
                          {"weight_seed", c.weight_seed}};
}

inline nlohmann::json to_json(const SparsityConfig& c) {
    return nlohmann::json{{"stride_n", c.stride_n},
                          {"blocks_total", c.blocks_total},
                          {"steps_total", c.steps_total},
                          {"sensitive_blocks", c.sensitive_blocks},
                          {"tail_steps", c.tail_steps},
                          {"interleave", c.interleave},
                          {"anchor_ratio", c.anchor_ratio()}};
}

// Fully resolved description of one invocation; echoed into the header of
// every text output so a run can be reproduced from any of its artifacts.
struct RunManifest {
    std::string command;
    ToyDiTConfig toy;
    SparsityConfig sparsity;
    std::string mode = "both";
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
    std::string timestamp;

    nlohmann::json to_json() const {
        return nlohmann::json{{"command", command},
                              {"toy", fis::to_json(toy)},
                              {"sparsity", fis::to_json(sparsity)},
                              {"mode", mode},
                              {"seeds", seeds},
                              {"out_dir", out_dir},
                              {"timestamp", timestamp}};
    }

    std::string comment_line() const { return "# manifest: " + to_json().dump() + "\n"; }
};

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// --- configuration file -----------------------------------------------------

namespace detail {

template <typename T>
T config_number(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) {
        throw config_error("config: key '" + key + "' must be an integer");
    }
    return j.get<T>();
}

}  // namespace detail

// Accepted keys: the sparse-policy grid (stride_n, blocks_total, steps_total,
// sensitive_blocks, tail_steps, frames, interleave) plus the toy-model shape
// (model_dim, heads, ffn_expansion, spatial, weight_seed). blocks_total,
// steps_total and frames set both the model and the policy grid. Returns the
// keys that were present.
inline std::set<std::string> apply_config_json(const nlohmann::json& root, ToyDiTConfig& toy,
                                               SparsityConfig& sp) {
    if (!root.is_object()) {
        throw config_error("config: top level must be a JSON object");
    }
    std::set<std::string> seen;
    for (const auto& [key, value] : root.items()) {
        seen.insert(key);
        if (key == "stride_n") {
            sp.stride_n = detail::config_number<int>(value, key);
        } else if (key == "blocks_total") {
            toy.blocks_total = detail::config_number<int>(value, key);
            sp.blocks_total = toy.blocks_total;
        } else if (key == "steps_total") {
            toy.steps_total = detail::config_number<int>(value, key);
            sp.steps_total = toy.steps_total;
        } else if (key == "sensitive_blocks") {
            if (!value.is_array()) {
                throw config_error("config: key 'sensitive_blocks' must be an array");
            }
            sp.sensitive_blocks.clear();
            for (const auto& item : value) {
                sp.sensitive_blocks.push_back(detail::config_number<int>(item, key));
            }
        } else if (key == "tail_steps") {
            sp.tail_steps = detail::config_number<int>(value, key);
        } else if (key == "frames") {
            toy.frames = detail::config_number<std::uint32_t>(value, key);
        } else if (key == "interleave") {
            if (!value.is_boolean()) {
                throw config_error("config: key 'interleave' must be a boolean");
            }
            sp.interleave = value.get<bool>();
        } else if (key == "model_dim") {
            toy.model_dim = detail::config_number<int>(value, key);
        } else if (key == "heads") {
            toy.heads = detail::config_number<int>(value, key);
        } else if (key == "ffn_expansion") {
            toy.ffn_expansion = detail::config_number<int>(value, key);
        } else if (key == "spatial") {
            toy.spatial = detail::config_number<std::uint32_t>(value, key);
        } else if (key == "weight_seed") {
            toy.weight_seed = detail::config_number<std::uint64_t>(value, key);
        } else {
            throw config_error("config: unknown key '" + key + "'");
        }
    }
    return seen;
}

inline std::set<std::string> load_config_file(const std::filesystem::path& path,
                                              ToyDiTConfig& toy, SparsityConfig& sp) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open config file " + path.string());
    }
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config: " + path.string() + " is not valid JSON: " + e.what());
    }
    return apply_config_json(root, toy, sp);
}

// --- single run --------------------------------------------------------------

struct RunArtifacts {
    std::optional<DenoiseResult> dense;
    std::optional<DenoiseResult> sparse;
    std::vector<double> frame_errors;  // dense vs. sparse, when both ran
    double max_abs = 0.0;
};

// mode "dense": dense only. mode "sparse"/"both": sparse run plus the dense
// oracle, so the error report is always available.
inline RunArtifacts execute_run(const ToyDiT& model, const SparsityConfig& sparsity,
                                const std::string& mode, std::uint64_t seed) {
    if (mode != "dense" && mode != "sparse" && mode != "both") {
        throw config_error("mode must be dense, sparse or both, got '" + mode + "'");
    }
    RunArtifacts out;
    const LatentSequence noise = sample_init_noise(model.config(), seed);
    out.dense = denoise(noise, model, std::nullopt);
    if (mode != "dense") {
        out.sparse = denoise(noise, model, sparsity);
        out.frame_errors = per_frame_error(out.dense->latent, out.sparse->latent);
        out.max_abs = max_abs_diff(out.dense->latent, out.sparse->latent);
    }
    return out;
}

inline std::string ledger_csv(const RunManifest& manifest, const FlopsLedger& ledger) {
    std::ostringstream out;
    out << manifest.comment_line();
    out << "step,block,gated,token_count,attn_madds,ffn_madds\n";
    for (const LedgerRow& row : ledger.rows) {
        out << row.step << ',' << row.block << ',' << (row.gated ? 1 : 0) << ','
            << row.token_count << ',' << row.attn_madds << ',' << row.ffn_madds << '\n';
    }
    return out.str();
}

inline std::string per_frame_error_csv(const RunManifest& manifest,
                                       const std::vector<double>& errors) {
    std::ostringstream out;
    out << manifest.comment_line();
    out << "frame,error\n";
    for (std::size_t f = 0; f < errors.size(); ++f) {
        out << f << ',' << fmt_sig(errors[f]) << '\n';
    }
    return out.str();
}

// --- ablation grids ----------------------------------------------------------

struct AblationCell {
    std::string grid;  // "scheduling" or "protection"
    std::string name;
    SparsityConfig sparsity;
    double mean_error = 0.0;  // mean over seeds of the frame-averaged error
    std::uint64_t dense_madds = 0;
    std::uint64_t sparse_madds = 0;
    double speedup = 0.0;
};

// Scheduling grid: {interleaved, fixed} x strides {3, 4, 5}.
// Protection grid at the base stride: full, no block protection (S = {}),
// no step protection (tail = 0), neither.
inline std::vector<AblationCell> ablation_grid(const SparsityConfig& base) {
    std::vector<AblationCell> cells;
    for (int n : {3, 4, 5}) {
        for (bool interleave : {true, false}) {
            AblationCell cell;
            cell.grid = "scheduling";
            cell.name = std::string(interleave ? "interleaved" : "fixed") + "_n" +
                        std::to_string(n);
            cell.sparsity = base;
            cell.sparsity.stride_n = n;
            cell.sparsity.interleave = interleave;
            cells.push_back(std::move(cell));
        }
    }
    const auto protection = [&](const std::string& name, bool keep_blocks, bool keep_tail) {
        AblationCell cell;
        cell.grid = "protection";
        cell.name = name;
        cell.sparsity = base;
        if (!keep_blocks) cell.sparsity.sensitive_blocks.clear();
        if (!keep_tail) cell.sparsity.tail_steps = 0;
        return cell;
    };
    cells.push_back(protection("full", true, true));
    cells.push_back(protection("no_block", false, true));
    cells.push_back(protection("no_step", true, false));
    cells.push_back(protection("neither", false, false));
    return cells;
}

inline double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

// Runs every cell over every seed. One dense oracle per seed is shared by all
// cells. Seeds run concurrently (independent runs); aggregation order is
// fixed by seed index, so results do not depend on thread timing.
inline void run_ablation(const ToyDiTConfig& toy, std::vector<AblationCell>& cells,
                         const std::vector<std::uint64_t>& seeds,
                         const std::function<void(const AblationCell&)>& on_cell = {}) {
    if (seeds.empty()) {
        throw config_error("ablation: need at least one seed");
    }
    const ToyDiT model(toy);

    // per seed, per cell: frame-averaged error
    std::vector<std::vector<double>> cell_errors(seeds.size(),
                                                 std::vector<double>(cells.size(), 0.0));
    const auto run_seed = [&](std::size_t si) {
        const LatentSequence noise = sample_init_noise(toy, seeds[si]);
        const DenoiseResult dense = denoise(noise, model, std::nullopt);
        for (std::size_t ci = 0; ci < cells.size(); ++ci) {
            const DenoiseResult sparse = denoise(noise, model, cells[ci].sparsity);
            cell_errors[si][ci] = mean_of(per_frame_error(dense.latent, sparse.latent));
            if (si == 0) {
                cells[ci].dense_madds = dense.ledger.dense_madds;
                cells[ci].sparse_madds = sparse.ledger.sparse_madds;
                cells[ci].speedup = static_cast<double>(dense.ledger.dense_madds) /
                                    static_cast<double>(sparse.ledger.sparse_madds);
            }
        }
    };

    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::future<void>> pending;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
        pending.push_back(std::async(std::launch::async, run_seed, si));
        if (pending.size() == workers) {
            for (auto& f : pending) f.get();
            pending.clear();
        }
    }
    for (auto& f : pending) f.get();

    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        double acc = 0.0;
        for (std::size_t si = 0; si < seeds.size(); ++si) acc += cell_errors[si][ci];
        cells[ci].mean_error = acc / static_cast<double>(seeds.size());
        if (on_cell) on_cell(cells[ci]);
    }
}

inline std::string ablation_csv(const RunManifest& manifest,
                                const std::vector<AblationCell>& cells) {
    std::ostringstream out;
    out << manifest.comment_line();
    out << "grid,cell,stride_n,interleave,sensitive_blocks,tail_steps,seeds,"
           "mean_error,dense_madds,sparse_madds,speedup\n";
    for (const AblationCell& cell : cells) {
        std::string sensitive;
        for (std::size_t i = 0; i < cell.sparsity.sensitive_blocks.size(); ++i) {
            if (i) sensitive += ' ';
            sensitive += std::to_string(cell.sparsity.sensitive_blocks[i]);
        }
        out << cell.grid << ',' << cell.name << ',' << cell.sparsity.stride_n << ','
            << (cell.sparsity.interleave ? 1 : 0) << ',' << sensitive << ','
            << cell.sparsity.tail_steps << ',' << manifest.seeds.size() << ','
            << fmt_sig(cell.mean_error) << ',' << cell.dense_madds << ','
            << cell.sparse_madds << ',' << fmt_fixed3(cell.speedup) << '\n';
    }
    return out.str();
}

// --- diagnostics pipeline ----------------------------------------------------

struct DiagnoseResult {
    DiagnosticsReport report;     // probed curves, CV matrix, per-frame errors
    DiagnosticsReport synthetic;  // synthetic_probe output
};

// Dense runs with a post-block feature probe at every (block, step); seeds
// play the role of prompts in the CV average. The per-frame error curve comes
// from a sparse-vs-dense pair on the first seed.
inline DiagnoseResult run_diagnose(const ToyDiTConfig& toy, const SparsityConfig& sparsity,
                                   const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) {
        throw config_error("diagnose: need at least one seed");
    }
    const ToyDiT model(toy);
    DiagnoseResult out;

    std::vector<CurveSet> per_seed_curves(seeds.size());
    std::vector<LatentSequence> final_dense(seeds.size());
    const auto run_seed = [&](std::size_t p) {
        const LatentSequence noise = sample_init_noise(toy, seeds[p]);
        CurveSet& curves = per_seed_curves[p];
        const ProbeFn probe = [&](int step, int block, const LatentSequence& h) {
            curves[{block, step, static_cast<int>(p)}] = adjacent_changes(h).rel_change;
        };
        final_dense[p] = denoise(noise, model, std::nullopt, probe).latent;
    };

    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::future<void>> pending;
    for (std::size_t p = 0; p < seeds.size(); ++p) {
        pending.push_back(std::async(std::launch::async, run_seed, p));
        if (pending.size() == workers) {
            for (auto& f : pending) f.get();
            pending.clear();
        }
    }
    for (auto& f : pending) f.get();

    for (CurveSet& curves : per_seed_curves) {
        out.report.rel_change_curves.merge(curves);
    }
    out.report.cv_matrix = cv_stats(out.report.rel_change_curves);

    const LatentSequence noise0 = sample_init_noise(toy, seeds[0]);
    const DenoiseResult sparse0 = denoise(noise0, model, sparsity);
    out.report.per_frame_errors = per_frame_error(final_dense[0], sparse0.latent);

    out.report.metadata["probe_point"] = "post_block";
    out.report.metadata["error_point"] = "final_latent";
    out.report.metadata["prompts"] = "seeds";
    out.report.metadata["prompt_count"] = std::to_string(seeds.size());
    out.report.metadata["toy_config"] = fis::to_json(toy).dump();
    out.report.metadata["sparsity_config"] = fis::to_json(sparsity).dump();
    out.report.validate();

    out.synthetic = synthetic_probe();
    return out;
}

inline std::string rel_change_csv(const RunManifest& manifest, const DiagnosticsReport& report) {
    std::ostringstream out;
    out << manifest.comment_line();
    out << "block,step,prompt,frame_i,delta_rel\n";
    for (const auto& [key, curve] : report.rel_change_curves) {
        for (std::size_t i = 0; i < curve.size(); ++i) {
            out << key.block << ',' << key.step << ',' << key.prompt << ',' << i << ','
                << fmt_sig(curve[i]) << '\n';
        }
    }
    return out.str();
}

inline std::string cv_heatmap_csv(const RunManifest& manifest, const DiagnosticsReport& report) {
    std::ostringstream out;
    out << manifest.comment_line();
    out << "block,step,mean_cv\n";
    for (const auto& [cell, cv] : report.cv_matrix) {
        out << cell.first << ',' << cell.second << ',' << fmt_sig(cv) << '\n';
    }
    return out.str();
}

}  // namespace fis
