#include "mgs/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>

#include "json.hpp"
#include "mgs/checkpoint.hpp"
#include "mgs/io.hpp"
#include "mgs/parallel.hpp"
#include "mgs/render.hpp"
#include "mgs/spatial.hpp"

namespace mgs {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t stack_seed(std::uint64_t seed, std::size_t k) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k), 0x5eedu};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

Simulation simulate(const RunConfig& cfg) {
    Simulation sim;
    const int n = cfg.sim.phantom_size;
    sim.gt = make_phantom(cfg.sim.phantom, {n, n, n}, cfg.train.seed);
    for (std::size_t k = 0; k < cfg.sim.stacks.size(); ++k) {
        AcquisitionParams p;
        p.orientation = cfg.sim.stacks[k];
        p.in_plane_spacing = cfg.sim.in_plane_spacing;
        p.slice_thickness = cfg.sim.slice_thickness;
        p.slice_gap = cfg.sim.slice_gap;
        p.motion_sigma = cfg.sim.motion_sigma;
        p.noise_sigma = cfg.sim.noise_sigma;
        p.registration_sigma = cfg.sim.registration_sigma;
        p.seed = stack_seed(cfg.train.seed, k);
        sim.stacks.push_back(acquire_stack(sim.gt, p));
    }
    return sim;
}

std::vector<ManifestEntry> write_simulation(const std::filesystem::path& dir, const Simulation& sim) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> files;
    if (!sim.gt.data.empty()) {
        write_volume(dir / "gt.nii", sim.gt);
        files.push_back("gt.nii");
    }
    for (std::size_t k = 0; k < sim.stacks.size(); ++k) {
        const std::string base = "stack_" + std::to_string(k) + "_" + std::string(to_string(sim.stacks[k].orientation));
        write_stack(dir / (base + ".nii"), sim.stacks[k]);
        files.push_back(base + ".nii");
        files.push_back(base + ".json");
    }
    return write_manifest(dir, files);
}

Simulation read_simulation(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
    Simulation sim;
    std::vector<std::filesystem::path> stacks;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.starts_with("stack_") && entry.path().extension() == ".nii") stacks.push_back(entry.path());
    }
    // numeric order of the stack index
    std::sort(stacks.begin(), stacks.end(), [](const auto& a, const auto& b) {
        return std::stoi(a.filename().string().substr(6)) < std::stoi(b.filename().string().substr(6));
    });
    if (stacks.empty()) throw Error(ErrorCode::IoError, "no stack_*.nii files in " + dir.string());
    for (const auto& p : stacks) sim.stacks.push_back(read_stack(p));
    if (std::filesystem::exists(dir / "gt.nii")) sim.gt = read_volume(dir / "gt.nii");
    return sim;
}

Volume default_output_grid(const Dataset& data, const std::vector<SliceStack>& stacks, int output_size) {
    const Vec3 lo = data.normalization.bbox_lo_mm;
    const Vec3 hi = data.normalization.bbox_hi_mm;
    const Vec3 extent = hi - lo;
    double spacing = stacks.empty() ? 1.0 : stacks.front().in_plane_spacing;
    if (output_size > 0) spacing = extent.maxCoeff() / std::max(output_size - 1, 1);
    Index3 dims;
    for (int a = 0; a < 3; ++a) dims[a] = std::max(1, static_cast<int>(std::floor(extent[a] / spacing + 1e-9)) + 1);
    Volume grid = Volume::zeros(dims, Vec3::Constant(spacing), lo);
    return grid;
}

Volume output_grid_like(const Volume& gt, int output_size) {
    if (output_size <= 0 || output_size == gt.dims[0]) {
        Volume g = gt;
        std::fill(g.data.begin(), g.data.end(), 0.0f);
        return g;
    }
    Vec3 spacing, origin;
    for (int a = 0; a < 3; ++a) {
        const double length = gt.dims[a] * gt.spacing[a];
        spacing[a] = length / output_size;
        origin[a] = gt.origin[a] - 0.5 * gt.spacing[a] + 0.5 * spacing[a];
    }
    return Volume::zeros({output_size, output_size, output_size}, spacing, origin);
}

Volume render_to_grid(const Trainer& trainer, const NormalizationRecord& norm, const Volume& grid) {
    if (!grid.direction.isIdentity(1e-12)) {
        throw Error(ErrorCode::GeometryMismatch, "output grid must be axis-aligned");
    }
    SamplingBox box;
    box.origin = norm.to_normalized(grid.origin);
    box.spacing = grid.spacing * norm.scale;
    Volume out = trainer.render(grid.dims, box);
    for (float& v : out.data) v = static_cast<float>(v * norm.intensity_scale);
    out.spacing = grid.spacing;
    out.origin = grid.origin;
    out.direction = grid.direction;
    return out;
}

Volume trilinear_fusion(const std::vector<SliceStack>& stacks, const Volume& grid) {
    std::vector<Volume> vols;
    for (const auto& s : stacks) vols.push_back(stack_to_volume(s));
    Volume out = Volume::zeros(grid.dims, grid.spacing, grid.origin);
    out.direction = grid.direction;
    parallel_for(static_cast<std::size_t>(grid.dims[2]), [&](std::size_t z0, std::size_t z1) {
        for (int z = static_cast<int>(z0); z < static_cast<int>(z1); ++z)
            for (int y = 0; y < grid.dims[1]; ++y)
                for (int x = 0; x < grid.dims[0]; ++x) {
                    const Vec3 p = grid.voxel_to_world(Vec3(x, y, z));
                    double sum = 0.0;
                    int hits = 0;
                    for (const Volume& v : vols) {
                        Vec3 ijk = v.world_to_voxel(p);
                        bool inside = true;
                        for (int a = 0; a < 3; ++a) {
                            inside = inside && ijk[a] >= -0.5 && ijk[a] <= v.dims[a] - 0.5;
                            ijk[a] = std::clamp(ijk[a], 0.0, static_cast<double>(v.dims[a] - 1));
                        }
                        if (!inside) continue;
                        sum += sample_trilinear(v, ijk);
                        ++hits;
                    }
                    out.at(x, y, z) = hits ? static_cast<float>(sum / hits) : 0.0f;
                }
    });
    return out;
}

std::string format_loss(const LossReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "iter=%d resolution=%d nrf=%d total=%.17g smooth_l1=%.17g ssim=%.17g aniso=%.17g",
                  r.iteration, r.resolution, r.nrf_active ? 1 : 0, r.total, r.smooth_l1, r.ssim, r.aniso);
    return buf;
}

Reconstruction reconstruct(const RunConfig& cfg, const Dataset& data, const Volume& grid, const ReconOptions& opts) {
    const auto t0 = Clock::now();
    std::optional<Trainer> trainer;
    if (!opts.resume.empty()) {
        trainer.emplace(data, load_checkpoint(opts.resume));
    } else {
        trainer.emplace(data, cfg.train);
    }
    const int until = opts.until >= 0 ? opts.until : trainer->state().config.total_iters;
    Reconstruction rec;
    trainer->run(until, [&](const LossReport& r) {
        rec.log.push_back(r);
        if (opts.on_report) opts.on_report(r);
    });
    rec.volume = render_to_grid(*trainer, data.normalization, grid);
    rec.state = trainer->state();
    rec.runtime_seconds = seconds_since(t0);
    return rec;
}

std::vector<Variant> ablation_variants(const RunConfig& base, bool with_progressive_only) {
    std::vector<Variant> v;
    v.push_back({"full", base});
    RunConfig no_ssim = base;
    no_ssim.train.lambda_ssim = 0.0;
    v.push_back({"w/o SSIM", no_ssim});
    RunConfig no_ssim_pr = no_ssim;
    no_ssim_pr.train.resolution_schedule = {{0, base.train.final_resolution()}};
    v.push_back({"w/o SSIM & P.R.", no_ssim_pr});
    RunConfig no_nrf = base;
    no_nrf.train.use_nrf = false;
    v.push_back({"w/o NRF", no_nrf});
    RunConfig no_ar = base;
    no_ar.train.lambda_aniso = 0.0;
    v.push_back({"w/o A.R.", no_ar});
    if (with_progressive_only) {
        RunConfig no_pr = base;
        no_pr.train.resolution_schedule = {{0, base.train.final_resolution()}};
        v.push_back({"w/o P.R.", no_pr});
    }
    return v;
}

std::vector<Variant> radius_variants(const RunConfig& base) {
    std::vector<Variant> v;
    for (int r : base.bench.radii) {
        RunConfig c = base;
        c.train.block_radius = r;
        v.push_back({"radius " + std::to_string(r), c});
    }
    return v;
}

std::vector<Variant> resolution_variants(const RunConfig& base) {
    std::vector<Variant> v;
    for (int res : base.bench.resolutions) {
        RunConfig c = base;
        c.train.resolution_schedule = {{0, res}};
        v.push_back({"grid " + std::to_string(res) + "^3", c});
    }
    return v;
}

std::vector<ExperimentRow> run_variants(const RunConfig& base, const std::vector<Variant>& variants,
                                        const std::function<void(const ExperimentRow&)>& on_row) {
    const Simulation sim = simulate(base);
    const Dataset data = devoxelize(sim.stacks, base.foreground_threshold);
    const Volume grid = output_grid_like(sim.gt, base.output_size);
    const Volume gt = base.output_size > 0 && base.output_size != sim.gt.dims[0] ? Volume{} : sim.gt;
    std::vector<ExperimentRow> rows;
    for (const Variant& v : variants) {
        const Reconstruction rec = reconstruct(v.config, data, grid);
        ExperimentRow row;
        row.label = v.label;
        row.block_radius = v.config.train.block_radius;
        row.final_resolution = v.config.train.final_resolution();
        if (!gt.data.empty()) row.metrics = evaluate_volumes(rec.volume, gt);
        row.metrics.runtime_seconds = rec.runtime_seconds;
        rows.push_back(row);
        if (on_row) on_row(row);
    }
    return rows;
}

PerfResult run_perf_bench(const BenchConfig& cfg, int radius, std::uint64_t seed) {
    const int res = cfg.perf_lattice;
    GaussianField field = GaussianField::uniform_lattice({res, res, res});
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& l : field.intensity_logits) l = 2.0 * u(rng);
    const PartitionGrid grid = build_partition(field, res, radius);
    const FieldEvaluator eval(field, grid);

    PerfResult p;
    p.primitives = field.size();
    p.queries = static_cast<std::size_t>(cfg.perf_queries);
    p.dense_queries = std::min<std::size_t>(static_cast<std::size_t>(cfg.perf_dense_queries), p.queries);
    p.block_radius = radius;
    std::vector<Vec3> queries(p.queries);
    for (Vec3& q : queries) q = Vec3(u(rng), u(rng), u(rng)) * kNormalizedHalfExtent;

    std::vector<double> partitioned(p.queries);
    auto t0 = Clock::now();
    eval.evaluate(queries, partitioned);
    p.partitioned_seconds = seconds_since(t0);

    std::vector<double> dense(p.dense_queries);
    t0 = Clock::now();
    parallel_for(p.dense_queries, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) dense[i] = eval.evaluate_dense(queries[i]);
    });
    p.dense_sample_seconds = seconds_since(t0);
    p.dense_seconds_estimate = p.dense_sample_seconds * static_cast<double>(p.queries) / p.dense_queries;
    p.speedup = p.dense_seconds_estimate / p.partitioned_seconds;
    for (std::size_t i = 0; i < p.dense_queries; ++i) {
        p.max_abs_difference = std::max(p.max_abs_difference, std::abs(dense[i] - partitioned[i]));
    }
    return p;
}

std::string format_table(const std::vector<ExperimentRow>& rows) {
    std::size_t w = 13;
    for (const auto& r : rows) w = std::max(w, r.label.size());
    auto pad = [&](std::string s, std::size_t n) { return s + std::string(n > s.size() ? n - s.size() : 0, ' '); };
    std::string out = pad("configuration", w) + "  radius  grid  psnr_db   ssim     ncc      nrmse    seconds\n";
    for (const auto& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "  %6d  %4d  %7.3f  %7.5f  %7.5f  %7.5f  %8.2f\n", r.block_radius,
                      r.final_resolution, r.metrics.psnr_db, r.metrics.ssim, r.metrics.ncc, r.metrics.nrmse,
                      r.metrics.runtime_seconds);
        out += pad(r.label, w) + buf;
    }
    return out;
}

std::string format_rows_json(const std::vector<ExperimentRow>& rows) {
    std::string out;
    for (const auto& r : rows) {
        nlohmann::ordered_json j = nlohmann::ordered_json::parse(to_json(r.metrics));
        nlohmann::ordered_json row = {{"configuration", r.label},
                                      {"block_radius", r.block_radius},
                                      {"final_resolution", r.final_resolution}};
        for (auto it = j.begin(); it != j.end(); ++it) row[it.key()] = it.value();
        out += row.dump() + "\n";
    }
    return out;
}

std::string format_perf(const PerfResult& p) {
    return "primitives=" + std::to_string(p.primitives) + " queries=" + std::to_string(p.queries) +
           " block_radius=" + std::to_string(p.block_radius) +
           " partitioned_seconds=" + fmt("%.4f", p.partitioned_seconds) +
           " dense_queries=" + std::to_string(p.dense_queries) +
           " dense_sample_seconds=" + fmt("%.4f", p.dense_sample_seconds) +
           " dense_seconds_estimate=" + fmt("%.2f", p.dense_seconds_estimate) + " speedup=" + fmt("%.1f", p.speedup) +
           " max_abs_difference=" + fmt("%.3g", p.max_abs_difference);
}

}  // namespace mgs
