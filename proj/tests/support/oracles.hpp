#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance runner. Nothing here calls into the code it checks beyond the
// function under test itself.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "mgs/core.hpp"
#include "mgs/nrf.hpp"
#include "mgs/render.hpp"
#include "mgs/spatial.hpp"

namespace oracle {

using mgs::Vec3;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Sigma^-1 from Eigen's own quaternion and a dense inverse.
inline Eigen::Matrix3d precision(const mgs::Quat4& q, const Vec3& log_scale) {
    const Eigen::Quaterniond eq(q[0], q[1], q[2], q[3]);
    const Eigen::Matrix3d r = eq.normalized().toRotationMatrix();
    const Eigen::Vector3d s = log_scale.array().exp();
    const Eigen::Matrix3d cov = r * s.array().square().matrix().asDiagonal() * r.transpose();
    return cov.inverse();
}

inline double dense_intensity(const mgs::GaussianField& f, const Vec3& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const Vec3 d = x - f.position(i);
        acc += sigmoid(f.intensity_logits[i]) *
               std::exp(-0.5 * d.dot(precision(f.quaternion(i), f.log_scale(i)) * d));
    }
    return acc;
}

inline int cell_of(double c, int g) {
    const int k = static_cast<int>(std::floor((c + 1.0) * g / 2.0));
    return std::clamp(k, 0, g - 1);
}

/// Primitives whose cell is within `radius` cells of x's cell on every axis,
/// ascending.
inline std::vector<std::uint32_t> brute_force_members(const mgs::GaussianField& f, const Vec3& x, int g,
                                                      int radius) {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const Vec3 mu = f.position(i);
        bool inside = true;
        for (int a = 0; a < 3; ++a) inside = inside && std::abs(cell_of(mu[a], g) - cell_of(x[a], g)) <= radius;
        if (inside) out.push_back(static_cast<std::uint32_t>(i));
    }
    return out;
}

inline mgs::GaussianField random_field(std::mt19937_64& rng, std::size_t n, double extent = 0.6) {
    std::uniform_real_distribution<double> pos(-extent, extent), unit(-1.0, 1.0), ls(-2.3, -1.0),
        logit(-2.0, 2.0);
    std::vector<mgs::Primitive> prims(n);
    for (auto& p : prims) {
        p.position = Vec3(pos(rng), pos(rng), pos(rng));
        p.rotation = mgs::Quat4(unit(rng), unit(rng), unit(rng), unit(rng));
        if (p.rotation.norm() < 0.2) p.rotation[0] += 1.0;
        p.log_scale = Vec3(ls(rng), ls(rng), ls(rng));
        p.intensity_logit = logit(rng);
    }
    return mgs::GaussianField::from_primitives(prims);
}

/// |a - n| / max(|a|, |n|, floor): relative error with an absolute floor so
/// components that vanish analytically are judged on absolute error.
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
    double max_rel = 0.0;
    std::size_t checked = 0;

    void add(double analytic, double numeric) {
        max_rel = std::max(max_rel, rel_error(analytic, numeric));
        ++checked;
    }
};

inline constexpr double kFdStep = 1e-5;

/// Central differences of L = sum_b u_b I(T_k(x_b)) against render_backward,
/// for every parameter of every group, rigid transforms included.
inline GradCheck check_render_gradients(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    mgs::GaussianField field = random_field(rng, 5);
    std::vector<mgs::RigidTransform> transforms(2);
    for (int k = 0; k < 2; ++k) {
        transforms[k].slice_id = k;
        transforms[k].rotation_quat = mgs::Quat4(1.0, 0.15 * unit(rng), 0.15 * unit(rng), 0.15 * unit(rng));
        transforms[k].translation = 0.05 * Vec3(unit(rng), unit(rng), unit(rng));
    }
    std::vector<mgs::SamplePoint> samples(8);
    std::vector<double> upstream(samples.size());
    for (std::size_t b = 0; b < samples.size(); ++b) {
        const std::size_t i = b % field.size();
        samples[b].coord = field.position(i) + 0.25 * Vec3(unit(rng), unit(rng), unit(rng));
        samples[b].slice_id = static_cast<int>(b % 2);
        upstream[b] = unit(rng);
    }

    // Full radius: membership cannot change under a perturbation.
    const int g = 2;
    auto loss = [&](const mgs::GaussianField& f, const std::vector<mgs::RigidTransform>& t) {
        double total = 0.0;
        for (std::size_t b = 0; b < samples.size(); ++b) {
            total += upstream[b] * dense_intensity(f, mgs::apply_rigid(t[samples[b].slice_id], samples[b].coord));
        }
        return total;
    };
    const mgs::PartitionGrid grid = mgs::build_partition(field, g, g);
    const mgs::RenderGradients grads = mgs::render_backward(field, grid, transforms, samples, upstream);

    GradCheck out;
    auto probe = [&](std::vector<double>& values, const std::vector<double>& analytic) {
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double keep = values[j];
            values[j] = keep + kFdStep;
            const double up = loss(field, transforms);
            values[j] = keep - kFdStep;
            const double down = loss(field, transforms);
            values[j] = keep;
            out.add(analytic[j], (up - down) / (2.0 * kFdStep));
        }
    };
    probe(field.positions, grads.d_positions);
    probe(field.quaternions, grads.d_quaternions);
    probe(field.log_scales, grads.d_log_scales);
    probe(field.intensity_logits, grads.d_intensity_logits);

    for (std::size_t k = 0; k < transforms.size(); ++k) {
        for (int c = 0; c < mgs::kTransformParams; ++c) {
            auto bumped = [&](double h) {
                auto t = transforms;
                if (c < 4) t[k].rotation_quat[c] += h;
                else t[k].translation[c - 4] += h;
                return loss(field, t);
            };
            const double numeric = (bumped(kFdStep) - bumped(-kFdStep)) / (2.0 * kFdStep);
            out.add(grads.d_transform_params[mgs::kTransformParams * k + c], numeric);
        }
    }
    return out;
}

/// Central differences of sum_b u_b r(x_b) for the residual field's weights
/// and its input coordinates.
inline GradCheck check_nrf_gradients(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    mgs::ResidualField nrf = mgs::ResidualField::initialized(seed, 2, 8, 2, 0.1);
    // The zero output layer would hide the hidden-layer gradients.
    for (double& p : nrf.parameters()) p += 0.3 * unit(rng);

    std::vector<Vec3> x(6);
    std::vector<double> upstream(x.size());
    for (std::size_t b = 0; b < x.size(); ++b) {
        x[b] = 0.8 * Vec3(unit(rng), unit(rng), unit(rng));
        upstream[b] = unit(rng);
    }
    auto loss = [&](const mgs::ResidualField& f, const std::vector<Vec3>& pts) {
        double total = 0.0;
        for (std::size_t b = 0; b < pts.size(); ++b) total += upstream[b] * f.forward_one(pts[b]);
        return total;
    };
    std::vector<double> grad_params(nrf.parameter_count());
    std::vector<Vec3> grad_x(x.size());
    nrf.backward(x, upstream, grad_params, grad_x);

    GradCheck out;
    auto params = nrf.parameters();
    for (std::size_t j = 0; j < params.size(); ++j) {
        const double keep = params[j];
        params[j] = keep + kFdStep;
        const double up = loss(nrf, x);
        params[j] = keep - kFdStep;
        const double down = loss(nrf, x);
        params[j] = keep;
        out.add(grad_params[j], (up - down) / (2.0 * kFdStep));
    }
    for (std::size_t b = 0; b < x.size(); ++b) {
        for (int a = 0; a < 3; ++a) {
            auto pts = x;
            pts[b][a] += kFdStep;
            const double up = loss(nrf, pts);
            pts[b][a] -= 2.0 * kFdStep;
            const double down = loss(nrf, pts);
            out.add(grad_x[b][a], (up - down) / (2.0 * kFdStep));
        }
    }
    return out;
}

}  // namespace oracle
