#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mgs/core.hpp"
#include "mgs/nrf.hpp"
#include "mgs/render.hpp"
#include "mgs/simdata.hpp"
#include "mgs/spatial.hpp"

namespace mgs {

struct ScheduleEntry {
    int iteration = 0;
    int resolution = 0;

    bool operator==(const ScheduleEntry&) const = default;
};

/// Optimization hyperparameters. Defaults are the full-scale
/// settings (70^3 -> 200^3 lattice over 4000 iterations).
struct TrainConfig {
    double lr_position = 0.001;
    double lr_intensity = 0.05;
    double lr_scale = 0.005;
    double lr_rotation = 0.001;
    double lr_nrf = 0.0001;
    double lr_transform = 0.0001;

    double lambda_ssim = 0.5;
    double lambda_aniso = 0.1;
    double lambda_r = 1.5;

    int block_radius = 5;
    std::vector<ScheduleEntry> resolution_schedule{{0, 70}, {500, 100}, {1000, 130}, {2000, 170}, {3000, 200}};
    int nrf_activation_iter = 2000;
    bool use_nrf = true;
    bool optimize_transforms = true;
    int total_iters = 4000;
    int batch_points = 65536;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    std::uint64_t seed = 0;

    /// Throws OutOfRangeValue on a non-positive learning rate, a schedule that
    /// does not start at 0 / is not strictly increasing in iteration / shrinks.
    void validate() const;
    int resolution_at(int iteration) const;
    int final_resolution() const { return resolution_schedule.back().resolution; }

    bool operator==(const TrainConfig&) const = default;
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment buffers for one parameter group.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;

    void reset(std::size_t n);
    /// Bias-corrected Adam update in place. The buffers are (re)sized to
    /// match params on first use.
    void update(std::span<double> params, std::span<const double> grad, double lr, const AdamHyper& hyper);

    bool operator==(const AdamState&) const = default;
};

struct OptimizerState {
    AdamState position;
    AdamState rotation;
    AdamState scale;
    AdamState intensity;
    AdamState transform;
    AdamState nrf;

    void reset_gaussian_groups(std::size_t primitives);

    bool operator==(const OptimizerState&) const = default;
};

// --- losses -----------------------------------------------------------------

/// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise, with x = pred - target.
double smooth_l1(double pred, double target);
/// Mean smooth-L1 over the batch; grad receives d(mean)/d(pred) when non-empty.
double smooth_l1_mean(std::span<const double> pred, std::span<const double> target, std::span<double> grad = {});

/// 1 - mean SSIM over one slice (11x11 Gaussian window, sigma 1.5).
/// grad receives d(loss)/d(pred) when non-empty.
double ssim_loss(std::span<const double> pred, std::span<const double> target, int width, int height,
                 std::span<double> grad = {});

/// max(0, max(scale) / min(scale) - lambda_r) for one primitive.
double aniso_term(const Vec3& scales, double lambda_r);
/// Mean of aniso_term over the field using exp(log_scale). grad_log_scales
/// (N x 3) receives d(loss)/d(log_scale) when non-empty.
double aniso_loss(const GaussianField& field, double lambda_r, std::span<double> grad_log_scales = {});

// --- progressive schedule ---------------------------------------------------

/// Normalized linear interpolation of up to eight quaternions. Each is sign
/// aligned with `reference` before the weighted sum.
Quat4 nlerp(std::span<const Quat4> quats, std::span<const double> weights, const Quat4& reference);

/// Re-seeds a new_R^3 lattice and interpolates intensity logits and
/// log-scales trilinearly (in lattice index space) and rotations by NLERP.
/// Throws ShrinkNotAllowed if new_R is below the current resolution.
GaussianField progressive_upsample(const GaussianField& field, int new_resolution);

/// Fresh lattice at resolution R. Logits come from the mean observed
/// intensity of the (transformed) samples in each node's cell; empty cells
/// get logit 0.
GaussianField initialize_field(std::span<const SamplePoint> samples, std::span<const RigidTransform> transforms,
                               int resolution);

// --- training ----------------------------------------------------------------

struct TrainState {
    TrainConfig config;
    GaussianField field;
    ResidualField residual;
    std::vector<RigidTransform> transforms;
    OptimizerState optimizer;
    int iteration = 0;
};

struct LossReport {
    int iteration = 0;
    int resolution = 0;
    bool nrf_active = false;
    double total = 0.0;
    double smooth_l1 = 0.0;
    double ssim = 0.0;   // 1 - SSIM of the sampled slice, 0 when disabled
    double aniso = 0.0;
};

/// A full slice used for the structural term.
struct SlicePixels {
    int slice_id = 0;
    int width = 0;
    int height = 0;
    std::span<const Vec3> coords;
    std::span<const double> intensities;
};

/// One optimizer step: forward, losses, backward, Adam update, grid rebuild.
/// Throws NonFiniteLoss (naming the iteration) if the loss is not finite.
LossReport train_step(TrainState& state, PartitionGrid& grid, std::span<const SamplePoint> batch,
                      const SlicePixels* ssim_slice);

bool nrf_active_at(const TrainConfig& cfg, int iteration);

/// Owns the schedule: batch selection, SSIM slice choice, resolution
/// milestones. Batches and slice picks are pure functions of (seed,
/// iteration), so a resumed run replays the same sequence.
class Trainer {
public:
    Trainer(const Dataset& data, const TrainConfig& config);
    Trainer(const Dataset& data, TrainState state);

    LossReport step();
    /// Steps until iteration == until; on_report sees every step.
    void run(int until, const std::function<void(const LossReport&)>& on_report = {});

    const TrainState& state() const { return state_; }
    TrainState& state() { return state_; }
    const PartitionGrid& grid() const { return grid_; }
    bool residual_in_use() const;

    Volume render(const Index3& dims, const SamplingBox& box, std::size_t max_voxels = kDefaultMaxVoxels) const;

private:
    void ensure_resolution();
    std::span<const std::uint32_t> batch_indices(int iteration);

    const Dataset* data_;
    TrainState state_;
    PartitionGrid grid_;
    std::vector<std::uint32_t> permutation_;
    std::int64_t permutation_epoch_ = -1;
    std::vector<SamplePoint> batch_;
    std::vector<int> ssim_candidates_;
};

}  // namespace mgs
