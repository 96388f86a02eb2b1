#include <cmath>

#include "mgs/train.hpp"

namespace mgs {

void AdamState::reset(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    step = 0;
}

void AdamState::update(std::span<double> params, std::span<const double> grad, double lr, const AdamHyper& hyper) {
    if (grad.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "Adam gradient length mismatch");
    if (m.size() != params.size()) reset(params.size());
    ++step;
    const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * grad[i];
        v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
}

void OptimizerState::reset_gaussian_groups(std::size_t primitives) {
    position.reset(3 * primitives);
    rotation.reset(4 * primitives);
    scale.reset(3 * primitives);
    intensity.reset(primitives);
}

}  // namespace mgs
