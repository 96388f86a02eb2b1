#include <algorithm>
#include <cmath>
#include <string>

#include "mgs/ssim.hpp"
#include "mgs/train.hpp"

namespace mgs {

double smooth_l1(double pred, double target) {
    const double x = pred - target;
    const double ax = std::abs(x);
    return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

double smooth_l1_mean(std::span<const double> pred, std::span<const double> target, std::span<double> grad) {
    if (pred.size() != target.size() || (!grad.empty() && grad.size() != pred.size())) {
        throw Error(ErrorCode::ShapeMismatch, "smooth_l1 inputs disagree in length");
    }
    if (pred.empty()) return 0.0;
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        sum += smooth_l1(pred[i], target[i]);
        if (!grad.empty()) grad[i] = std::clamp(pred[i] - target[i], -1.0, 1.0) * inv_n;
    }
    return sum * inv_n;
}

double ssim_loss(std::span<const double> pred, std::span<const double> target, int width, int height,
                 std::span<double> grad) {
    const double s = ssim2d(pred, target, width, height, grad);
    for (double& g : grad) g = -g;
    return 1.0 - s;
}

double aniso_term(const Vec3& scales, double lambda_r) {
    return std::max(0.0, scales.maxCoeff() / scales.minCoeff() - lambda_r);
}

double aniso_loss(const GaussianField& field, double lambda_r, std::span<double> grad_log_scales) {
    const std::size_t n = field.size();
    if (n == 0) return 0.0;
    if (!grad_log_scales.empty() && grad_log_scales.size() != 3 * n) {
        throw Error(ErrorCode::ShapeMismatch, "aniso gradient buffer has the wrong length");
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 s = field.log_scale(i);
        const Vec3 scales = s.array().exp();
        const double term = aniso_term(scales, lambda_r);
        sum += term;
        if (term > 0.0 && !grad_log_scales.empty()) {
            // ratio = exp(s_max - s_min)
            Eigen::Index hi = 0, lo = 0;
            scales.maxCoeff(&hi);
            scales.minCoeff(&lo);
            const double ratio = scales[hi] / scales[lo];
            grad_log_scales[3 * i + hi] += ratio * inv_n;
            grad_log_scales[3 * i + lo] -= ratio * inv_n;
        }
    }
    return sum * inv_n;
}

}  // namespace mgs
