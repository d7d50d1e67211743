// fisdit: deterministic frame-sparse inference runs on a toy video DiT.
//
//   fisdit run      — dense and/or sparse denoise, latent dump + ledgers
//   fisdit ablate   — scheduling and protection grids over a seed sweep
//   fisdit diagnose — redundancy metrics (change curves, CV heatmap, errors)
//
// Exit codes: 0 success, 2 config error, 3 IO error, 4 probe/assertion failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fis/runner.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config_path;
    std::string out_dir;
    std::string seeds = "7";
    std::string mode = "both";
    std::string sensitive;  // empty: default; "none": empty set
    int stride = -1;
    int tail = -1;
    int blocks = -1;
    int steps = -1;
    int frames = -1;
    int dim = -1;
    int spatial = -1;
    bool no_interleave = false;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, sep)) {
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> seeds;
    for (const std::string& part : split(s, ',')) {
        try {
            seeds.push_back(std::stoull(part));
        } catch (const std::exception&) {
            throw fis::config_error("invalid seed '" + part + "'");
        }
    }
    if (seeds.empty()) {
        throw fis::config_error("seed list is empty");
    }
    return seeds;
}

std::vector<int> parse_block_list(const std::string& s) {
    if (s == "none") return {};
    std::vector<int> blocks;
    for (const std::string& part : split(s, ',')) {
        try {
            blocks.push_back(std::stoi(part));
        } catch (const std::exception&) {
            throw fis::config_error("invalid block index '" + part + "'");
        }
    }
    std::sort(blocks.begin(), blocks.end());
    blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
    return blocks;
}

std::vector<int> default_sensitive(int blocks_total) {
    std::vector<int> s{0, blocks_total - 2, blocks_total - 1};
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    s.erase(std::remove_if(s.begin(), s.end(), [&](int l) { return l < 0; }), s.end());
    return s;
}

fis::RunManifest resolve(const Options& opt, const std::string& command) {
    fis::ToyDiTConfig toy;
    fis::SparsityConfig sp;
    bool sensitive_set = false;

    if (!opt.config_path.empty()) {
        const auto keys = fis::load_config_file(opt.config_path, toy, sp);
        sensitive_set = keys.count("sensitive_blocks") != 0;
    }
    if (opt.blocks > 0) {
        toy.blocks_total = opt.blocks;
    }
    if (opt.steps > 0) {
        toy.steps_total = opt.steps;
    }
    if (opt.frames > 0) {
        toy.frames = static_cast<std::uint32_t>(opt.frames);
    }
    if (opt.dim > 0) {
        toy.model_dim = opt.dim;
    }
    if (opt.spatial > 0) {
        toy.spatial = static_cast<std::uint32_t>(opt.spatial);
    }
    if (opt.stride > 0) {
        sp.stride_n = opt.stride;
    }
    if (opt.tail >= 0) {
        sp.tail_steps = opt.tail;
    }
    if (!opt.sensitive.empty()) {
        sp.sensitive_blocks = parse_block_list(opt.sensitive);
        sensitive_set = true;
    }
    if (opt.no_interleave) {
        sp.interleave = false;
    }
    sp.blocks_total = toy.blocks_total;
    sp.steps_total = toy.steps_total;
    if (!sensitive_set) {
        sp.sensitive_blocks = default_sensitive(toy.blocks_total);
    }
    toy.validate();
    sp.validate();

    fis::RunManifest manifest;
    manifest.command = command;
    manifest.toy = toy;
    manifest.sparsity = sp;
    manifest.mode = opt.mode;
    manifest.seeds = parse_seeds(opt.seeds);
    manifest.out_dir = opt.out_dir;
    manifest.timestamp = fis::utc_timestamp();
    return manifest;
}

fs::path prepare_out_dir(const std::string& dir) {
    const fs::path out(dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) {
        throw fis::io_error("cannot create output directory " + out.string() + ": " +
                            ec.message());
    }
    return out;
}

void write_manifest(const fs::path& out, const fis::RunManifest& manifest) {
    fis::atomic_write_text(out / "manifest.json", manifest.to_json().dump(2) + "\n");
}

int cmd_run(const Options& opt) {
    const fis::RunManifest manifest = resolve(opt, "run");
    const fs::path out = prepare_out_dir(manifest.out_dir);
    const fis::ToyDiT model(manifest.toy);
    const fis::RunArtifacts run =
        fis::execute_run(model, manifest.sparsity, manifest.mode, manifest.seeds[0]);

    std::ostringstream summary;
    summary << manifest.comment_line();
    summary << "command=run\nmode=" << manifest.mode << "\nseed=" << manifest.seeds[0] << '\n';
    summary << "dense_madds=" << run.dense->ledger.dense_madds << '\n';
    summary << "analytic_dense=" << run.dense->ledger.analytic_dense << '\n';

    if (manifest.mode != "sparse") {
        const auto bytes = fis::encode_lsq(run.dense->latent);
        fis::atomic_write_bytes(out / "final_dense.lsq", bytes.data(), bytes.size());
        fis::atomic_write_text(out / "ledger_dense.csv",
                               fis::ledger_csv(manifest, run.dense->ledger));
    }
    if (run.sparse) {
        const auto bytes = fis::encode_lsq(run.sparse->latent);
        fis::atomic_write_bytes(out / "final_sparse.lsq", bytes.data(), bytes.size());
        fis::atomic_write_text(out / "ledger_sparse.csv",
                               fis::ledger_csv(manifest, run.sparse->ledger));
        fis::atomic_write_text(out / "per_frame_error.csv",
                               fis::per_frame_error_csv(manifest, run.frame_errors));
        const double speedup = static_cast<double>(run.dense->ledger.dense_madds) /
                               static_cast<double>(run.sparse->ledger.sparse_madds);
        summary << "sparse_madds=" << run.sparse->ledger.sparse_madds << '\n';
        summary << "analytic_sparse=" << run.sparse->ledger.analytic_sparse << '\n';
        summary << "speedup=" << fis::fmt_fixed3(speedup) << '\n';
        summary << "max_abs_diff=" << fis::fmt_sig(run.max_abs) << '\n';
        summary << "mean_frame_error=" << fis::fmt_sig(fis::mean_of(run.frame_errors)) << '\n';
    }
    fis::atomic_write_text(out / "summary.txt", summary.str());
    write_manifest(out, manifest);
    std::cout << summary.str();
    return 0;
}

int cmd_ablate(const Options& opt) {
    const fis::RunManifest manifest = resolve(opt, "ablate");
    const fs::path out = prepare_out_dir(manifest.out_dir);
    std::vector<fis::AblationCell> cells = fis::ablation_grid(manifest.sparsity);
    fis::run_ablation(manifest.toy, cells, manifest.seeds,
                      [](const fis::AblationCell& cell) {
                          std::cout << "cell " << cell.grid << '/' << cell.name
                                    << " mean_error=" << fis::fmt_sig(cell.mean_error)
                                    << " speedup=" << fis::fmt_fixed3(cell.speedup) << '\n';
                      });
    fis::atomic_write_text(out / "ablation.csv", fis::ablation_csv(manifest, cells));

    std::ostringstream summary;
    summary << manifest.comment_line();
    summary << "command=ablate\nseeds=" << manifest.seeds.size() << "\ncells=" << cells.size()
            << '\n';
    fis::atomic_write_text(out / "summary.txt", summary.str());
    write_manifest(out, manifest);
    return 0;
}

int cmd_diagnose(const Options& opt) {
    const fis::RunManifest manifest = resolve(opt, "diagnose");
    const fs::path out = prepare_out_dir(manifest.out_dir);
    const fis::DiagnoseResult diag =
        fis::run_diagnose(manifest.toy, manifest.sparsity, manifest.seeds);

    fis::atomic_write_text(out / "rel_change.csv", fis::rel_change_csv(manifest, diag.report));
    fis::atomic_write_text(out / "cv_heatmap.csv", fis::cv_heatmap_csv(manifest, diag.report));
    fis::atomic_write_text(out / "per_frame_error.csv",
                           fis::per_frame_error_csv(manifest, diag.report.per_frame_errors));

    std::ostringstream summary;
    summary << manifest.comment_line();
    summary << "command=diagnose\nprompts=" << manifest.seeds.size() << '\n';
    summary << "cv_cells=" << diag.report.cv_matrix.size() << '\n';
    summary << "synthetic_probe=pass\n";
    summary << "synthetic_mean_rel_change=" << diag.synthetic.metadata.at("mean_rel_change")
            << '\n';
    fis::atomic_write_text(out / "summary.txt", summary.str());
    write_manifest(out, manifest);
    std::cout << summary.str();
    return 0;
}

void add_common_flags(CLI::App* cmd, Options& opt) {
    cmd->add_option("--config", opt.config_path, "JSON config file");
    cmd->add_option("--out", opt.out_dir, "output directory (default: $FIS_OUT or ./out)");
    cmd->add_option("--seed", opt.seeds, "seed or comma-separated seed list");
    cmd->add_option("--stride", opt.stride, "anchor stride n")->check(CLI::PositiveNumber);
    cmd->add_option("--mode", opt.mode, "dense|sparse|both")
        ->check(CLI::IsMember({"dense", "sparse", "both"}));
    cmd->add_option("--tail", opt.tail, "dense tail steps")->check(CLI::NonNegativeNumber);
    cmd->add_option("--sensitive", opt.sensitive,
                    "comma-separated sensitive block list, or 'none'");
    cmd->add_option("--blocks", opt.blocks, "total transformer blocks")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--steps", opt.steps, "denoising steps")->check(CLI::PositiveNumber);
    cmd->add_option("--frames", opt.frames, "latent frames")->check(CLI::PositiveNumber);
    cmd->add_option("--dim", opt.dim, "model channel dimension")->check(CLI::PositiveNumber);
    cmd->add_option("--spatial", opt.spatial, "spatial grid side (height == width)")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--no-interleave", opt.no_interleave,
                  "reuse anchor offset 0 in every sparse block");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic frame-sparse inference on a toy video DiT"};
    app.require_subcommand(1);

    Options opt;
    if (const char* env = std::getenv("FIS_OUT")) {
        opt.out_dir = env;
    }
    if (opt.out_dir.empty()) {
        opt.out_dir = "out";
    }

    CLI::App* run = app.add_subcommand("run", "dense and/or sparse denoise run");
    CLI::App* ablate = app.add_subcommand("ablate", "scheduling and protection grids");
    CLI::App* diagnose = app.add_subcommand("diagnose", "redundancy metrics and probes");
    add_common_flags(run, opt);
    add_common_flags(ablate, opt);
    add_common_flags(diagnose, opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (run->parsed()) return cmd_run(opt);
        if (ablate->parsed()) return cmd_ablate(opt);
        if (diagnose->parsed()) return cmd_diagnose(opt);
        std::cerr << "error: no command given\n";
        return 2;
    } catch (const fis::config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const fis::io_error& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 3;
    } catch (const fis::diagnostic_error& e) {
        std::cerr << "probe failure: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
