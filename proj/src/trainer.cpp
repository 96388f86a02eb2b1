#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mgs/parallel.hpp"
#include "mgs/train.hpp"

namespace mgs {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::OutOfRangeValue, what);
}

constexpr std::uint64_t kBatchStream = 1;
constexpr std::uint64_t kSliceStream = 2;
constexpr std::uint64_t kResidualStream = 3;

}  // namespace

void TrainConfig::validate() const {
    for (double lr : {lr_position, lr_intensity, lr_scale, lr_rotation, lr_nrf, lr_transform}) {
        require(lr > 0.0 && std::isfinite(lr), "learning rates must be positive");
    }
    require(lambda_ssim >= 0.0 && lambda_aniso >= 0.0 && lambda_r > 0.0, "loss weights must be non-negative");
    require(block_radius >= 0, "block_radius must be non-negative");
    require(total_iters >= 0, "total_iters must be non-negative");
    require(batch_points >= 1, "batch_points must be positive");
    require(nrf_activation_iter >= 0, "nrf_activation_iter must be non-negative");
    require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
            "Adam betas must lie in [0, 1)");
    require(adam_eps > 0.0, "adam_eps must be positive");
    require(!resolution_schedule.empty(), "resolution schedule is empty");
    require(resolution_schedule.front().iteration == 0, "resolution schedule must start at iteration 0");
    for (std::size_t i = 0; i < resolution_schedule.size(); ++i) {
        require(resolution_schedule[i].resolution >= 2, "lattice resolution must be at least 2");
        if (i == 0) continue;
        require(resolution_schedule[i].iteration > resolution_schedule[i - 1].iteration,
                "schedule iterations must be strictly increasing");
        require(resolution_schedule[i].resolution >= resolution_schedule[i - 1].resolution,
                "schedule resolutions must not decrease");
    }
}

int TrainConfig::resolution_at(int iteration) const {
    int r = resolution_schedule.front().resolution;
    for (const auto& e : resolution_schedule) {
        if (e.iteration <= iteration) r = e.resolution;
    }
    return r;
}

bool nrf_active_at(const TrainConfig& cfg, int iteration) {
    return cfg.use_nrf && iteration >= cfg.nrf_activation_iter;
}

LossReport train_step(TrainState& state, PartitionGrid& grid, std::span<const SamplePoint> batch,
                      const SlicePixels* ssim_slice) {
    const TrainConfig& cfg = state.config;
    GaussianField& field = state.field;
    const int it = state.iteration;
    const bool nrf_on = nrf_active_at(cfg, it) && state.residual.is_initialized();
    const bool use_ssim = ssim_slice != nullptr && cfg.lambda_ssim > 0.0;

    std::vector<SamplePoint> points(batch.begin(), batch.end());
    if (use_ssim) {
        for (std::size_t p = 0; p < ssim_slice->coords.size(); ++p) {
            points.push_back({ssim_slice->coords[p], ssim_slice->intensities[p], ssim_slice->slice_id});
        }
    }
    const std::size_t nb = batch.size();
    const std::size_t total = points.size();

    const std::vector<Vec3> x = transform_samples(state.transforms, points);
    const FieldEvaluator eval(field, grid);
    std::vector<double> pred(total);
    std::vector<Vec3> grad_x(cfg.optimize_transforms ? total : 0);
    eval.evaluate(x, pred, grad_x);
    if (nrf_on) {
        std::vector<double> r(total);
        state.residual.forward(x, r);
        for (std::size_t b = 0; b < total; ++b) pred[b] += r[b];
    }

    LossReport report;
    report.iteration = it;
    report.resolution = field.lattice_dims[0];
    report.nrf_active = nrf_on;

    std::vector<double> upstream(total, 0.0);
    std::vector<double> target(nb);
    for (std::size_t b = 0; b < nb; ++b) target[b] = batch[b].intensity;
    report.smooth_l1 = smooth_l1_mean(std::span(pred).first(nb), target, std::span(upstream).first(nb));

    if (use_ssim) {
        const std::size_t np = total - nb;
        std::span<double> g = std::span(upstream).subspan(nb, np);
        report.ssim = ssim_loss(std::span<const double>(pred).subspan(nb, np), ssim_slice->intensities,
                                ssim_slice->width, ssim_slice->height, g);
        for (double& v : g) v *= cfg.lambda_ssim;
    }

    std::vector<double> aniso_grad(3 * field.size(), 0.0);
    report.aniso = cfg.lambda_aniso > 0.0 ? aniso_loss(field, cfg.lambda_r, aniso_grad) : 0.0;

    report.total = report.smooth_l1 + cfg.lambda_ssim * report.ssim + cfg.lambda_aniso * report.aniso;
    if (!std::isfinite(report.total)) {
        throw Error(ErrorCode::NonFiniteLoss, "loss became non-finite at iteration " + std::to_string(it));
    }

    RenderGradients grads;
    grads.resize(field.size(), state.transforms.size());
    eval.accumulate_gradients(x, upstream, grads);
    for (std::size_t k = 0; k < aniso_grad.size(); ++k) grads.d_log_scales[k] += cfg.lambda_aniso * aniso_grad[k];

    std::vector<double> nrf_grad;
    std::vector<Vec3> residual_grad_x;
    if (nrf_on) {
        nrf_grad.resize(state.residual.parameter_count());
        if (cfg.optimize_transforms) residual_grad_x.resize(total);
        state.residual.backward(x, upstream, nrf_grad, residual_grad_x);
    }
    if (cfg.optimize_transforms) {
        for (std::size_t b = 0; b < total; ++b) {
            grad_x[b] *= upstream[b];
            if (nrf_on) grad_x[b] += residual_grad_x[b];
        }
        transform_backward(state.transforms, points, grad_x, grads.d_transform_params);
    }

    const AdamHyper hyper{cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
    OptimizerState& opt = state.optimizer;
    opt.position.update(field.positions, grads.d_positions, cfg.lr_position, hyper);
    opt.rotation.update(field.quaternions, grads.d_quaternions, cfg.lr_rotation, hyper);
    opt.scale.update(field.log_scales, grads.d_log_scales, cfg.lr_scale, hyper);
    opt.intensity.update(field.intensity_logits, grads.d_intensity_logits, cfg.lr_intensity, hyper);

    if (cfg.optimize_transforms && !state.transforms.empty()) {
        std::vector<double> packed(kTransformParams * state.transforms.size());
        for (std::size_t k = 0; k < state.transforms.size(); ++k) {
            double* p = packed.data() + kTransformParams * k;
            for (int c = 0; c < 4; ++c) p[c] = state.transforms[k].rotation_quat[c];
            for (int a = 0; a < 3; ++a) p[4 + a] = state.transforms[k].translation[a];
        }
        opt.transform.update(packed, grads.d_transform_params, cfg.lr_transform, hyper);
        for (std::size_t k = 0; k < state.transforms.size(); ++k) {
            const double* p = packed.data() + kTransformParams * k;
            state.transforms[k].rotation_quat = Quat4(p[0], p[1], p[2], p[3]);
            state.transforms[k].translation = Vec3(p[4], p[5], p[6]);
        }
    }
    if (nrf_on) opt.nrf.update(state.residual.parameters(), nrf_grad, cfg.lr_nrf, hyper);

    grid = build_partition(field, grid.grid_resolution, grid.block_radius);
    ++state.iteration;
    return report;
}

Trainer::Trainer(const Dataset& data, const TrainConfig& config) : data_(&data) {
    config.validate();
    state_.config = config;
    const int r0 = config.resolution_at(0);
    state_.field = initialize_field(data.samples, data.initial_transforms, r0);
    if (config.use_nrf) state_.residual = ResidualField::initialized(mix(config.seed, kResidualStream));
    state_.transforms = data.initial_transforms;
    state_.optimizer.reset_gaussian_groups(state_.field.size());
    state_.optimizer.transform.reset(kTransformParams * state_.transforms.size());
    state_.optimizer.nrf.reset(state_.residual.parameter_count());
    grid_ = build_partition(state_.field, r0, config.block_radius);
    for (std::size_t s = 0; s < data.slices.size(); ++s) {
        const SliceRecord& rec = data.slices[s];
        if (rec.width >= 11 && rec.height >= 11) ssim_candidates_.push_back(static_cast<int>(s));
    }
}

Trainer::Trainer(const Dataset& data, TrainState state) : data_(&data), state_(std::move(state)) {
    state_.config.validate();
    state_.field.validate();
    if (state_.transforms.size() != data.initial_transforms.size()) {
        throw Error(ErrorCode::ShapeMismatch, "resumed state has " + std::to_string(state_.transforms.size()) +
                                                  " slice transforms but the data has " +
                                                  std::to_string(data.initial_transforms.size()));
    }
    grid_ = build_partition(state_.field, state_.field.lattice_dims[0], state_.config.block_radius);
    for (std::size_t s = 0; s < data.slices.size(); ++s) {
        const SliceRecord& rec = data.slices[s];
        if (rec.width >= 11 && rec.height >= 11) ssim_candidates_.push_back(static_cast<int>(s));
    }
}

void Trainer::ensure_resolution() {
    const int target = state_.config.resolution_at(state_.iteration);
    if (state_.field.lattice_dims[0] == target) return;
    state_.field = progressive_upsample(state_.field, target);
    state_.optimizer.reset_gaussian_groups(state_.field.size());
    grid_ = build_partition(state_.field, target, state_.config.block_radius);
}

std::span<const std::uint32_t> Trainer::batch_indices(int iteration) {
    const std::size_t n = data_->samples.size();
    const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(state_.config.batch_points), n);
    const std::size_t per_epoch = n / b;
    const auto epoch = static_cast<std::int64_t>(static_cast<std::size_t>(iteration) / per_epoch);
    if (epoch != permutation_epoch_) {
        permutation_.resize(n);
        std::iota(permutation_.begin(), permutation_.end(), 0u);
        std::mt19937_64 rng(mix(mix(state_.config.seed, kBatchStream), static_cast<std::uint64_t>(epoch)));
        std::shuffle(permutation_.begin(), permutation_.end(), rng);
        permutation_epoch_ = epoch;
    }
    const std::size_t pos = static_cast<std::size_t>(iteration) % per_epoch;
    return std::span<const std::uint32_t>(permutation_).subspan(pos * b, b);
}

LossReport Trainer::step() {
    ensure_resolution();
    const int it = state_.iteration;
    const auto idx = batch_indices(it);
    batch_.resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) batch_[k] = data_->samples[idx[k]];

    SlicePixels slice;
    const SlicePixels* slice_ptr = nullptr;
    if (state_.config.lambda_ssim > 0.0 && !ssim_candidates_.empty()) {
        const std::uint64_t h = mix(mix(state_.config.seed, kSliceStream), static_cast<std::uint64_t>(it));
        const int id = ssim_candidates_[h % ssim_candidates_.size()];
        const SliceRecord& rec = data_->slices[static_cast<std::size_t>(id)];
        slice = {id, rec.width, rec.height, rec.coords, rec.intensities};
        slice_ptr = &slice;
    }
    return train_step(state_, grid_, batch_, slice_ptr);
}

void Trainer::run(int until, const std::function<void(const LossReport&)>& on_report) {
    while (state_.iteration < until) {
        const LossReport r = step();
        if (on_report) on_report(r);
    }
    ensure_resolution();
}

bool Trainer::residual_in_use() const {
    return nrf_active_at(state_.config, state_.iteration) && state_.residual.is_initialized();
}

Volume Trainer::render(const Index3& dims, const SamplingBox& box, std::size_t max_voxels) const {
    return sample_volume(state_.field, grid_, residual_in_use() ? &state_.residual : nullptr, dims, box, max_voxels);
}

}  // namespace mgs
