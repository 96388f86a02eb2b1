#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mgs/config.hpp"
#include "mgs/metrics.hpp"
#include "mgs/simdata.hpp"
#include "mgs/stack_io.hpp"
#include "mgs/train.hpp"

namespace mgs {

struct Simulation {
    Volume gt;
    std::vector<SliceStack> stacks;
};

/// Phantom plus one stack per configured orientation. Stack k uses a seed
/// derived from (seed, k), so adding a stack does not change the others.
Simulation simulate(const RunConfig& cfg);

/// gt.nii, stack_<k>_<orientation>.nii/.json and manifest.txt.
std::vector<ManifestEntry> write_simulation(const std::filesystem::path& dir, const Simulation& sim);
/// Stacks in file order; gt is left empty when gt.nii is absent.
Simulation read_simulation(const std::filesystem::path& dir);

/// Axis-aligned grid that covers the stacks' bounding box. output_size 0
/// keeps the first stack's in-plane spacing.
Volume default_output_grid(const Dataset& data, const std::vector<SliceStack>& stacks, int output_size);
/// Same extent as `gt`, resampled to output_size^3 voxels (gt itself for 0).
Volume output_grid_like(const Volume& gt, int output_size);

/// Renders the trained field on `grid` (world mm, axis-aligned) and maps
/// intensities back to stack units.
Volume render_to_grid(const Trainer& trainer, const NormalizationRecord& norm, const Volume& grid);

/// Baseline without motion correction: every stack is trilinearly
/// interpolated at the grid's voxel centers and the covering stacks are
/// averaged.
Volume trilinear_fusion(const std::vector<SliceStack>& stacks, const Volume& grid);

struct ReconOptions {
    int until = -1;                       // target iteration; -1 uses total_iters
    std::filesystem::path resume;         // checkpoint to continue from
    std::function<void(const LossReport&)> on_report;
};

struct Reconstruction {
    Volume volume;
    TrainState state;
    std::vector<LossReport> log;
    double runtime_seconds = 0.0;
};

Reconstruction reconstruct(const RunConfig& cfg, const Dataset& data, const Volume& grid, const ReconOptions& opts = {});

/// One "key=value" record per iteration.
std::string format_loss(const LossReport& r);

// --- experiments ---------------------------------------------------------

struct ExperimentRow {
    std::string label;
    int block_radius = 0;
    int final_resolution = 0;
    MetricReport metrics;
};

struct Variant {
    std::string label;
    RunConfig config;
};

/// full, w/o SSIM, w/o SSIM & P.R., w/o NRF, w/o A.R.; with
/// `with_progressive_only` a sixth row disables only the progressive schedule.
std::vector<Variant> ablation_variants(const RunConfig& base, bool with_progressive_only = false);

/// Simulates the configured phantom, then trains and scores each variant.
std::vector<ExperimentRow> run_variants(const RunConfig& base, const std::vector<Variant>& variants,
                                        const std::function<void(const ExperimentRow&)>& on_row = {});

std::vector<Variant> radius_variants(const RunConfig& base);
std::vector<Variant> resolution_variants(const RunConfig& base);

struct PerfResult {
    std::size_t primitives = 0;
    std::size_t queries = 0;
    std::size_t dense_queries = 0;
    int block_radius = 0;
    double partitioned_seconds = 0.0;
    double dense_sample_seconds = 0.0;
    double dense_seconds_estimate = 0.0;  // dense_sample_seconds * queries / dense_queries
    double speedup = 0.0;
    double max_abs_difference = 0.0;      // partitioned vs dense on the shared subsample
};

/// Random field on a perf_lattice^3 lattice, block radius `radius`.
PerfResult run_perf_bench(const BenchConfig& cfg, int radius, std::uint64_t seed);

std::string format_table(const std::vector<ExperimentRow>& rows);
std::string format_rows_json(const std::vector<ExperimentRow>& rows);
std::string format_perf(const PerfResult& p);

}  // namespace mgs
