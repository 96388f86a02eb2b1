#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mgs/core.hpp"
#include "mgs/spatial.hpp"
#include "mgs/volume.hpp"

namespace mgs {

class ResidualField;

struct RenderBatch {
    std::vector<Vec3> points;  // post-transform coordinates
    std::vector<double> intensities;
    std::vector<std::uint32_t> contributor_counts;
};

/// Gradients of sum_b upstream_b * I(x_b). Transform parameters are laid out
/// per slice as (qw, qx, qy, qz, tx, ty, tz).
struct RenderGradients {
    std::vector<double> d_positions;         // N x 3
    std::vector<double> d_quaternions;       // N x 4
    std::vector<double> d_log_scales;        // N x 3
    std::vector<double> d_intensity_logits;  // N
    std::vector<double> d_transform_params;  // K x 7

    void resize(std::size_t primitives, std::size_t transforms);
};

inline constexpr int kTransformParams = 7;

/// Per-iteration view of a Gaussian field packed in partition order. Owns
/// the activated quantities (normalized rotations, precisions, sigmoid
/// intensities) so forward and backward passes do not recompute them.
class FieldEvaluator {
public:
    /// Zero entries appended to every packed array.
    static constexpr std::size_t kLanePad = 8;

    /// Throws InconsistentGrid when the grid was built for another field size.
    FieldEvaluator(const GaussianField& field, const PartitionGrid& grid);

    const PartitionGrid& grid() const { return *grid_; }
    std::size_t size() const { return alpha_.size(); }

    /// I(x) at already-transformed points. grad_x (dI/dx) and counts are
    /// filled when non-empty.
    void evaluate(std::span<const Vec3> points, std::span<double> intensity, std::span<Vec3> grad_x = {},
                  std::span<std::uint32_t> counts = {}) const;

    /// I(x) for one point by scanning every primitive (no partition).
    double evaluate_dense(const Vec3& x) const;

    /// Adds d(sum_b upstream_b I(x_b)) / d(primitive params) into out.
    /// Each primitive's sums are formed in a fixed order, independent of the
    /// thread count.
    void accumulate_gradients(std::span<const Vec3> points, std::span<const double> upstream,
                              RenderGradients& out) const;

private:
    const PartitionGrid* grid_;
    // packed in grid order
    std::vector<double> mx_, my_, mz_;
    std::vector<double> p00_, p01_, p02_, p11_, p12_, p22_;
    std::vector<double> alpha_packed_;
    // original order
    std::vector<double> alpha_;
    std::vector<Mat3> rotation_;
    std::vector<Vec3> inv_var_;
    std::vector<Quat4> raw_quat_;
    std::vector<std::uint8_t> scale_clamped_;  // bit a set when |s_a| > 20
    std::vector<Vec3> mu_;
    std::vector<Mat3> precision_;
};

/// x = T_k(x_sample) for every sample; transforms are indexed by slice id.
std::vector<Vec3> transform_samples(std::span<const RigidTransform> transforms, std::span<const SamplePoint> samples);

/// Chain rule from dL/dx_b (post-transform) into per-slice transform
/// parameters. Accumulates in sample order.
void transform_backward(std::span<const RigidTransform> transforms, std::span<const SamplePoint> samples,
                        std::span<const Vec3> grad_points, std::span<double> d_transform_params);

RenderBatch render_points(const GaussianField& field, const PartitionGrid& grid,
                          std::span<const RigidTransform> transforms, std::span<const SamplePoint> samples);

RenderGradients render_backward(const GaussianField& field, const PartitionGrid& grid,
                                std::span<const RigidTransform> transforms, std::span<const SamplePoint> samples,
                                std::span<const double> upstream);

/// Regular sampling box in normalized coordinates: voxel i sits at
/// origin + i * spacing.
struct SamplingBox {
    Vec3 origin = Vec3::Constant(-1.0);
    Vec3 spacing = Vec3::Constant(2.0 / 64.0);

    static SamplingBox covering(const Vec3& lo, const Vec3& hi, const Index3& dims);
};

/// Voxel budget above which sample_volume refuses to allocate.
inline constexpr std::size_t kDefaultMaxVoxels = std::size_t{512} * 512 * 512;

/// I(x) (+ r(x) when a residual field is given) at every voxel, clamped to
/// [0, 1]. The returned volume carries the box geometry in normalized units.
Volume sample_volume(const GaussianField& field, const PartitionGrid& grid, const ResidualField* residual,
                     const Index3& dims, const SamplingBox& box, std::size_t max_voxels = kDefaultMaxVoxels);

}  // namespace mgs
