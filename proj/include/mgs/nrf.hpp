#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mgs/core.hpp"

namespace mgs {

/// [x, sin(2^k pi x), cos(2^k pi x)] for k = 0 .. bands-1; within each band
/// the three sines come first, then the three cosines. Length 3 + 6 * bands.
std::vector<double> fourier_encode(const Vec3& x, int bands);

/// Neural residual field r(x) = bound * tanh(MLP(encode(x))). The MLP has
/// `hidden_layers` SiLU layers of `width` units and a linear scalar output.
///
/// Parameters live in one flat vector, layer by layer: the weight matrix
/// (out x in, column-major) followed by the bias vector. The optimizer
/// treats that vector as a single parameter group.
class ResidualField {
public:
    static constexpr int kDefaultBands = 6;
    static constexpr int kDefaultWidth = 64;
    static constexpr int kDefaultHiddenLayers = 4;
    static constexpr double kDefaultBound = 0.1;

    /// Uninitialized; forward/backward throw UninitializedField.
    ResidualField() = default;

    /// Glorot-uniform hidden layers, zero output layer (so r == 0 at start).
    static ResidualField initialized(std::uint64_t seed, int bands = kDefaultBands, int width = kDefaultWidth,
                                     int hidden_layers = kDefaultHiddenLayers, double bound = kDefaultBound);
    /// Same topology with every weight and bias zero.
    static ResidualField zeros(int bands = kDefaultBands, int width = kDefaultWidth,
                               int hidden_layers = kDefaultHiddenLayers, double bound = kDefaultBound);

    bool is_initialized() const { return !widths_.empty(); }
    int frequency_bands() const { return bands_; }
    int input_dim() const { return 3 + 6 * bands_; }
    double output_bound() const { return bound_; }
    const std::vector<int>& layer_widths() const { return widths_; }
    int layer_count() const { return static_cast<int>(widths_.size()) - 1; }

    std::size_t parameter_count() const { return params_.size(); }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }
    std::size_t weight_offset(int layer) const { return offsets_.at(static_cast<std::size_t>(layer)); }
    std::size_t bias_offset(int layer) const;

    void forward(std::span<const Vec3> x, std::span<double> out) const;
    double forward_one(const Vec3& x) const;

    /// Writes d(sum_b upstream_b r(x_b))/d(params) into grad_params
    /// (overwritten) and, when grad_x is non-empty, dr/dx_b * upstream_b.
    /// Batch reductions use reduction_chunk_count() fixed chunks.
    void backward(std::span<const Vec3> x, std::span<const double> upstream, std::span<double> grad_params,
                  std::span<Vec3> grad_x = {}) const;

    /// Rebuilds the layout for serialized parameters; throws ShapeMismatch
    /// when params has the wrong length.
    static ResidualField from_parameters(int bands, int width, int hidden_layers, double bound,
                                         std::vector<double> params);

private:
    void require_initialized() const;
    void layout(int bands, int width, int hidden_layers, double bound);

    int bands_ = 0;
    double bound_ = kDefaultBound;
    std::vector<int> widths_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

}  // namespace mgs
