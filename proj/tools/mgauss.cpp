// mgauss: simulate, reconstruct, evaluate, bench, ablate.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "mgs/checkpoint.hpp"
#include "mgs/config.hpp"
#include "mgs/io.hpp"
#include "mgs/metrics.hpp"
#include "mgs/parallel.hpp"
#include "mgs/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mgs;

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    bool strict = false;
    std::optional<int> iters;
    std::string resume;
    std::string out;
};

RunConfig resolve_config(const Common& c) {
    RunConfig cfg = c.config_path.empty() ? desk_config() : load_config(c.config_path);
    if (c.seed) cfg.train.seed = *c.seed;
    return cfg;
}

fs::path require_out(const Common& c) {
    if (c.out.empty()) throw Error(ErrorCode::Usage, "--out is required");
    fs::create_directories(c.out);
    return c.out;
}

void write_text(const fs::path& p, const std::string& text) { write_file_atomic(p, text); }

int cmd_simulate(const Common& c) {
    const RunConfig cfg = resolve_config(c);
    const fs::path out = require_out(c);
    const Simulation sim = simulate(cfg);
    const auto manifest = write_simulation(out, sim);
    for (std::size_t k = 0; k < sim.stacks.size(); ++k) {
        std::printf("stack %zu: %s, %d x %d x %zu\n", k, std::string(to_string(sim.stacks[k].orientation)).c_str(),
                    sim.stacks[k].width(), sim.stacks[k].height(), sim.stacks[k].slices.size());
    }
    for (const auto& e : manifest) std::printf("%s  %s\n", e.sha256.c_str(), e.file.c_str());
    return 0;
}

int cmd_reconstruct(const Common& c, const std::string& input, const std::string& gt_path, int checkpoint_every) {
    RunConfig cfg = resolve_config(c);
    const fs::path out = require_out(c);
    const Simulation sim = read_simulation(input);
    const Dataset data = devoxelize(sim.stacks, cfg.foreground_threshold);

    Volume gt;
    if (!gt_path.empty()) {
        gt = read_volume(gt_path);
    } else if (!sim.gt.data.empty()) {
        gt = sim.gt;
    }
    const Volume grid = gt.data.empty() ? default_output_grid(data, sim.stacks, cfg.output_size)
                                        : output_grid_like(gt, cfg.output_size);

    std::string log;
    ReconOptions opts;
    opts.resume = c.resume;
    if (c.iters) opts.until = *c.iters;
    const fs::path ckpt = out / "checkpoint.mgss";
    opts.on_report = [&](const LossReport& r) { log += format_loss(r) + "\n"; };

    Reconstruction rec;
    if (checkpoint_every > 0) {
        // Train in segments so intermediate checkpoints exist.
        const auto t0 = std::chrono::steady_clock::now();
        std::optional<Trainer> tr;
        if (!c.resume.empty()) {
            tr.emplace(data, load_checkpoint(c.resume));
        } else {
            tr.emplace(data, cfg.train);
        }
        const int until = opts.until >= 0 ? opts.until : tr->state().config.total_iters;
        while (tr->state().iteration < until) {
            const int next = std::min(until, (tr->state().iteration / checkpoint_every + 1) * checkpoint_every);
            tr->run(next, opts.on_report);
            save_checkpoint(ckpt, tr->state());
        }
        rec.volume = render_to_grid(*tr, data.normalization, grid);
        rec.state = tr->state();
        rec.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } else {
        rec = reconstruct(cfg, data, grid, opts);
    }

    save_checkpoint(ckpt, rec.state);
    write_volume(out / "recon.nii", rec.volume);
    write_text(out / "loss_log.txt", log);
    char runtime[64];
    std::snprintf(runtime, sizeof runtime, "runtime_seconds=%.6f\n", rec.runtime_seconds);
    write_text(out / "runtime.txt", runtime);
    std::printf("iterations=%d %s", rec.state.iteration, runtime);

    if (!gt.data.empty() && gt.dims == rec.volume.dims) {
        MetricReport m = evaluate_volumes(rec.volume, gt);
        m.runtime_seconds = rec.runtime_seconds;
        write_text(out / "metrics.txt", to_key_value(m));
        write_text(out / "metrics.json", to_json(m) + "\n");
        std::printf("%s", to_key_value(m).c_str());
    }
    return 0;
}

int cmd_evaluate(const Common& c, const std::string& pred_path, const std::string& gt_path, bool json) {
    const Volume pred = read_volume(pred_path);
    const Volume gt = read_volume(gt_path);
    const MetricReport m = evaluate_volumes(pred, gt);
    const std::string text = json ? to_json(m) + "\n" : to_key_value(m);
    std::printf("%s", text.c_str());
    if (!c.out.empty()) {
        const fs::path out = require_out(c);
        write_text(out / "metrics.txt", to_key_value(m));
        write_text(out / "metrics.json", to_json(m) + "\n");
    }
    return 0;
}

RunConfig experiment_config(const Common& c) {
    RunConfig cfg = resolve_config(c);
    if (c.iters) cfg.train.total_iters = *c.iters;
    return cfg;
}

void emit_rows(const Common& c, const std::string& name, const std::vector<ExperimentRow>& rows) {
    std::printf("%s", format_table(rows).c_str());
    if (!c.out.empty()) {
        const fs::path out = require_out(c);
        write_text(out / (name + ".txt"), format_table(rows));
        write_text(out / (name + ".jsonl"), format_rows_json(rows));
    }
}

int cmd_bench(const Common& c, const std::string& only) {
    const RunConfig cfg = experiment_config(c);
    auto progress = [](const ExperimentRow& r) { std::fprintf(stderr, "done: %s\n", r.label.c_str()); };
    if (only.empty() || only == "perf") {
        const PerfResult p = run_perf_bench(cfg.bench, cfg.train.block_radius, cfg.train.seed);
        std::printf("%s\n", format_perf(p).c_str());
        if (!c.out.empty()) write_text(require_out(c) / "perf.txt", format_perf(p) + "\n");
    }
    if (only.empty() || only == "radius") {
        std::printf("block radius sweep\n");
        emit_rows(c, "radius_sweep", run_variants(cfg, radius_variants(cfg), progress));
    }
    if (only.empty() || only == "resolution") {
        std::printf("fixed resolution sweep\n");
        emit_rows(c, "resolution_sweep", run_variants(cfg, resolution_variants(cfg), progress));
    }
    return 0;
}

int cmd_ablate(const Common& c, bool progressive_only) {
    const RunConfig cfg = experiment_config(c);
    auto progress = [](const ExperimentRow& r) { std::fprintf(stderr, "done: %s\n", r.label.c_str()); };
    emit_rows(c, "ablation", run_variants(cfg, ablation_variants(cfg, progressive_only), progress));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Magnetic Gaussian slice-to-volume reconstruction"};
    app.require_subcommand(1);
    Common c;
    app.add_option("--config", c.config_path, "key = value config file (default: desk preset)");
    app.add_option("--seed", c.seed, "RNG seed override");
    app.add_option("--threads", c.threads, "worker thread cap")->check(CLI::NonNegativeNumber);
    app.add_flag("--strict-deterministic", c.strict, "fixed reduction order");
    app.add_option("--iters", c.iters, "target iteration count")->check(CLI::NonNegativeNumber);
    app.add_option("--resume", c.resume, "checkpoint to continue from");
    app.add_option("--out", c.out, "output directory");

    auto* simulate_cmd = app.add_subcommand("simulate", "phantom + thick-slice stacks + manifest");

    auto* recon_cmd = app.add_subcommand("reconstruct", "train on stacks, write volume, checkpoint and logs");
    std::string input, gt_path;
    int checkpoint_every = 0;
    recon_cmd->add_option("stacks", input, "directory written by simulate")->required();
    recon_cmd->add_option("--gt", gt_path, "ground-truth volume for the metric log");
    recon_cmd->add_option("--checkpoint-every", checkpoint_every, "also checkpoint every N iterations");

    auto* eval_cmd = app.add_subcommand("evaluate", "PSNR / SSIM / NCC / NRMSE of pred against gt");
    std::string pred_path, eval_gt;
    bool json = false;
    eval_cmd->add_option("pred", pred_path)->required();
    eval_cmd->add_option("gt", eval_gt)->required();
    eval_cmd->add_flag("--json", json, "print JSON instead of key=value");

    auto* bench_cmd = app.add_subcommand("bench", "render speed, block-radius and grid-resolution sweeps");
    std::string only;
    bench_cmd->add_option("--only", only, "perf, radius or resolution")
        ->check(CLI::IsMember({"perf", "radius", "resolution"}));

    auto* ablate_cmd = app.add_subcommand("ablate", "loss / schedule / residual ablation table");
    bool progressive_only = false;
    ablate_cmd->add_flag("--with-progressive-only", progressive_only, "add a row without only the progressive schedule");

    for (auto* sub : {simulate_cmd, recon_cmd, eval_cmd, bench_cmd, ablate_cmd}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (c.threads > 0) set_thread_count(c.threads);
        set_strict_deterministic(c.strict);
        if (*simulate_cmd) return cmd_simulate(c);
        if (*recon_cmd) return cmd_reconstruct(c, input, gt_path, checkpoint_every);
        if (*eval_cmd) return cmd_evaluate(c, pred_path, eval_gt, json);
        if (*bench_cmd) return cmd_bench(c, only);
        if (*ablate_cmd) return cmd_ablate(c, progressive_only);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
