#include "mgs/nrf.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "mgs/parallel.hpp"

namespace mgs {

namespace {

using Matrix = Eigen::MatrixXd;
using ConstMap = Eigen::Map<const Matrix>;

void encode_into(const Vec3& x, int bands, double* out) {
    out[0] = x[0], out[1] = x[1], out[2] = x[2];
    double freq = std::numbers::pi;
    for (int k = 0; k < bands; ++k, freq *= 2.0) {
        double* dst = out + 3 + 6 * k;
        for (int c = 0; c < 3; ++c) {
            dst[c] = std::sin(freq * x[c]);
            dst[3 + c] = std::cos(freq * x[c]);
        }
    }
}

double silu(double z) { return z * sigmoid(z); }

double silu_grad(double z) {
    const double s = sigmoid(z);
    return s * (1.0 + z * (1.0 - s));
}

}  // namespace

std::vector<double> fourier_encode(const Vec3& x, int bands) {
    std::vector<double> out(3 + 6 * static_cast<std::size_t>(std::max(bands, 0)));
    encode_into(x, std::max(bands, 0), out.data());
    return out;
}

void ResidualField::layout(int bands, int width, int hidden_layers, double bound) {
    bands_ = bands;
    bound_ = bound;
    widths_.clear();
    widths_.push_back(3 + 6 * bands);
    for (int l = 0; l < hidden_layers; ++l) widths_.push_back(width);
    widths_.push_back(1);
    offsets_.clear();
    std::size_t total = 0;
    for (int l = 0; l < layer_count(); ++l) {
        offsets_.push_back(total);
        total += static_cast<std::size_t>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
    }
    params_.assign(total, 0.0);
}

std::size_t ResidualField::bias_offset(int layer) const {
    const auto l = static_cast<std::size_t>(layer);
    return offsets_.at(l) + static_cast<std::size_t>(widths_[l]) * widths_[l + 1];
}

ResidualField ResidualField::zeros(int bands, int width, int hidden_layers, double bound) {
    ResidualField f;
    f.layout(bands, width, hidden_layers, bound);
    return f;
}

ResidualField ResidualField::initialized(std::uint64_t seed, int bands, int width, int hidden_layers, double bound) {
    ResidualField f = zeros(bands, width, hidden_layers, bound);
    std::mt19937_64 rng(seed);
    for (int l = 0; l + 1 < f.layer_count(); ++l) {
        const int fan_in = f.widths_[l], fan_out = f.widths_[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        double* w = f.params_.data() + f.offsets_[l];
        for (std::size_t k = 0; k < static_cast<std::size_t>(fan_in) * fan_out; ++k) w[k] = dist(rng);
    }
    return f;
}

ResidualField ResidualField::from_parameters(int bands, int width, int hidden_layers, double bound,
                                             std::vector<double> params) {
    ResidualField f = zeros(bands, width, hidden_layers, bound);
    if (params.size() != f.params_.size()) {
        throw Error(ErrorCode::ShapeMismatch, "residual field expects " + std::to_string(f.params_.size()) +
                                                  " parameters, got " + std::to_string(params.size()));
    }
    f.params_ = std::move(params);
    return f;
}

void ResidualField::require_initialized() const {
    if (!is_initialized()) throw Error(ErrorCode::UninitializedField, "residual field has no weights");
}

namespace {

struct LayerView {
    Matrix weight;
    Eigen::VectorXd bias;
};

}  // namespace

void ResidualField::forward(std::span<const Vec3> x, std::span<double> out) const {
    require_initialized();
    const int layers = layer_count();
    std::vector<LayerView> views;
    for (int l = 0; l < layers; ++l) {
        views.push_back({Matrix(ConstMap(params_.data() + offsets_[l], widths_[l + 1], widths_[l])),
                         Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(params_.data() + bias_offset(l), widths_[l + 1]))});
    }
    parallel_for(x.size(), [&](std::size_t begin, std::size_t end) {
        constexpr std::size_t kBlock = 512;
        for (std::size_t b0 = begin; b0 < end; b0 += kBlock) {
            const auto n = static_cast<Eigen::Index>(std::min(kBlock, end - b0));
            Matrix h(widths_[0], n);
            for (Eigen::Index j = 0; j < n; ++j) encode_into(x[b0 + j], bands_, h.col(j).data());
            for (int l = 0; l < layers; ++l) {
                Matrix z = views[l].weight * h;
                z.colwise() += views[l].bias;
                if (l + 1 < layers) z = z.unaryExpr([](double v) { return silu(v); });
                h = std::move(z);
            }
            for (Eigen::Index j = 0; j < n; ++j) out[b0 + j] = bound_ * std::tanh(h(0, j));
        }
    });
}

double ResidualField::forward_one(const Vec3& x) const {
    double out = 0.0;
    forward(std::span<const Vec3>(&x, 1), std::span<double>(&out, 1));
    return out;
}

void ResidualField::backward(std::span<const Vec3> x, std::span<const double> upstream, std::span<double> grad_params,
                             std::span<Vec3> grad_x) const {
    require_initialized();
    if (upstream.size() != x.size() || grad_params.size() != params_.size()) {
        throw Error(ErrorCode::ShapeMismatch, "residual backward buffer sizes disagree");
    }
    const int layers = layer_count();
    std::vector<LayerView> views;
    for (int l = 0; l < layers; ++l) {
        views.push_back({Matrix(ConstMap(params_.data() + offsets_[l], widths_[l + 1], widths_[l])),
                         Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(params_.data() + bias_offset(l), widths_[l + 1]))});
    }
    const auto ranges = split_range(x.size(), reduction_chunk_count(x.size()));
    struct Grads {
        std::vector<Matrix> w;
        std::vector<Eigen::VectorXd> b;
    };
    std::vector<Grads> partial(ranges.size());

    parallel_chunks(ranges, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        Grads& acc = partial[chunk];
        for (int l = 0; l < layers; ++l) {
            acc.w.push_back(Matrix::Zero(widths_[l + 1], widths_[l]));
            acc.b.push_back(Eigen::VectorXd::Zero(widths_[l + 1]));
        }
        constexpr std::size_t kBlock = 512;
        for (std::size_t b0 = begin; b0 < end; b0 += kBlock) {
            const auto n = static_cast<Eigen::Index>(std::min(kBlock, end - b0));
            std::vector<Matrix> acts(static_cast<std::size_t>(layers) + 1);  // inputs to each layer
            std::vector<Matrix> pre(static_cast<std::size_t>(layers));
            acts[0].resize(widths_[0], n);
            for (Eigen::Index j = 0; j < n; ++j) encode_into(x[b0 + j], bands_, acts[0].col(j).data());
            for (int l = 0; l < layers; ++l) {
                pre[l] = views[l].weight * acts[l];
                pre[l].colwise() += views[l].bias;
                acts[l + 1] = l + 1 < layers ? Matrix(pre[l].unaryExpr([](double v) { return silu(v); })) : pre[l];
            }
            // dL/dz for the output pre-activation.
            Matrix delta(1, n);
            for (Eigen::Index j = 0; j < n; ++j) {
                const double t = std::tanh(pre[layers - 1](0, j));
                delta(0, j) = upstream[b0 + j] * bound_ * (1.0 - t * t);
            }
            for (int l = layers - 1; l >= 0; --l) {
                acc.w[l].noalias() += delta * acts[l].transpose();
                acc.b[l] += delta.rowwise().sum();
                Matrix back = views[l].weight.transpose() * delta;
                if (l > 0) {
                    delta = back.cwiseProduct(pre[l - 1].unaryExpr([](double v) { return silu_grad(v); }));
                } else if (!grad_x.empty()) {
                    for (Eigen::Index j = 0; j < n; ++j) {
                        const Vec3& p = x[b0 + j];
                        Vec3 g(back(0, j), back(1, j), back(2, j));
                        double freq = std::numbers::pi;
                        for (int k = 0; k < bands_; ++k, freq *= 2.0) {
                            for (int c = 0; c < 3; ++c) {
                                g[c] += back(3 + 6 * k + c, j) * freq * std::cos(freq * p[c]);
                                g[c] -= back(6 + 6 * k + c, j) * freq * std::sin(freq * p[c]);
                            }
                        }
                        grad_x[b0 + j] = g;
                    }
                }
            }
        }
    });

    std::fill(grad_params.begin(), grad_params.end(), 0.0);
    for (const Grads& g : partial) {
        for (int l = 0; l < layers; ++l) {
            Eigen::Map<Matrix>(grad_params.data() + offsets_[l], widths_[l + 1], widths_[l]) += g.w[l];
            Eigen::Map<Eigen::VectorXd>(grad_params.data() + bias_offset(l), widths_[l + 1]) += g.b[l];
        }
    }
}

}  // namespace mgs
