#include "mgs/render.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mgs/detail/fast_exp.hpp"
#include "mgs/detail/simd.hpp"
#include "mgs/nrf.hpp"
#include "mgs/parallel.hpp"

namespace mgs {

using detail::exp_nonpositive;

void RenderGradients::resize(std::size_t primitives, std::size_t transforms) {
    d_positions.assign(3 * primitives, 0.0);
    d_quaternions.assign(4 * primitives, 0.0);
    d_log_scales.assign(3 * primitives, 0.0);
    d_intensity_logits.assign(primitives, 0.0);
    d_transform_params.assign(kTransformParams * transforms, 0.0);
}

FieldEvaluator::FieldEvaluator(const GaussianField& field, const PartitionGrid& grid) : grid_(&grid) {
    const std::size_t n = field.size();
    if (grid.primitive_count != n || grid.indices.size() != n) {
        throw Error(ErrorCode::InconsistentGrid, "partition grid holds " + std::to_string(grid.primitive_count) +
                                                     " primitives but the field has " + std::to_string(n));
    }
    alpha_.resize(n);
    rotation_.resize(n);
    inv_var_.resize(n);
    raw_quat_.resize(n);
    scale_clamped_.assign(n, 0);
    mu_.resize(n);
    precision_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        raw_quat_[i] = field.quaternion(i);
        rotation_[i] = quat_to_rotation(raw_quat_[i]);
        Vec3 s = field.log_scale(i);
        for (int a = 0; a < 3; ++a) {
            if (std::abs(s[a]) > kMaxLogScale) {
                s[a] = std::clamp(s[a], -kMaxLogScale, kMaxLogScale);
                scale_clamped_[i] |= static_cast<std::uint8_t>(1u << a);
            }
        }
        inv_var_[i] = (-2.0 * s.array()).exp();
        precision_[i] = rotation_[i] * inv_var_[i].asDiagonal() * rotation_[i].transpose();
        alpha_[i] = sigmoid(field.intensity_logits[i]);
        mu_[i] = field.position(i);
    }
    // Padding lets the vector loops read a full four-lane chunk past the
    // last primitive; padded lanes are always masked out.
    const std::size_t padded = n + kLanePad;
    for (auto* v : {&mx_, &my_, &mz_, &p00_, &p01_, &p02_, &p11_, &p12_, &p22_, &alpha_packed_}) v->assign(padded, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const std::uint32_t i = grid.indices[j];
        mx_[j] = mu_[i][0], my_[j] = mu_[i][1], mz_[j] = mu_[i][2];
        const Mat3& p = precision_[i];
        p00_[j] = p(0, 0), p01_[j] = p(0, 1), p02_[j] = p(0, 2);
        p11_[j] = p(1, 1), p12_[j] = p(1, 2), p22_[j] = p(2, 2);
        alpha_packed_[j] = alpha_[i];
    }
}

namespace {

Index3 unflatten(std::size_t flat, int res) {
    return {static_cast<int>(flat % res), static_cast<int>((flat / res) % res),
            static_cast<int>(flat / (static_cast<std::size_t>(res) * res))};
}

}  // namespace

void FieldEvaluator::evaluate(std::span<const Vec3> points, std::span<double> intensity, std::span<Vec3> grad_x,
                              std::span<std::uint32_t> counts) const {
    using detail::V4d;
    const PartitionGrid& g = *grid_;
    const bool want_grad = !grad_x.empty();
    const double* mx = mx_.data();
    const double* my = my_.data();
    const double* mz = mz_.data();
    const double* p00 = p00_.data();
    const double* p01 = p01_.data();
    const double* p02 = p02_.data();
    const double* p11 = p11_.data();
    const double* p12 = p12_.data();
    const double* p22 = p22_.data();
    const double* al = alpha_packed_.data();

    parallel_for(points.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t b = begin; b < end; ++b) {
            const V4d x0 = detail::splat(points[b][0]);
            const V4d x1 = detail::splat(points[b][1]);
            const V4d x2 = detail::splat(points[b][2]);
            const CellBox box = g.neighborhood(cell_index(points[b], g.grid_resolution));
            V4d acc{}, gx{}, gy{}, gz{};
            std::uint32_t count = 0;
            for (int z = box.lo[2]; z <= box.hi[2]; ++z) {
                for (int y = box.lo[1]; y <= box.hi[1]; ++y) {
                    const std::size_t first = g.offsets[g.flat({box.lo[0], y, z})];
                    const std::size_t last = g.offsets[g.flat({box.hi[0], y, z}) + 1];
                    count += static_cast<std::uint32_t>(last - first);
                    for (std::size_t j = first; j < last; j += 4) {
                        const V4d dx = x0 - detail::load4(mx + j);
                        const V4d dy = x1 - detail::load4(my + j);
                        const V4d dz = x2 - detail::load4(mz + j);
                        const V4d a00 = detail::load4(p00 + j), a01 = detail::load4(p01 + j);
                        const V4d a02 = detail::load4(p02 + j), a11 = detail::load4(p11 + j);
                        const V4d a12 = detail::load4(p12 + j), a22 = detail::load4(p22 + j);
                        const V4d px = a00 * dx + a01 * dy + a02 * dz;
                        const V4d py = a01 * dx + a11 * dy + a12 * dz;
                        const V4d pz = a02 * dx + a12 * dy + a22 * dz;
                        V4d w = detail::load4(al + j) * detail::exp_nonpositive(-0.5 * (dx * px + dy * py + dz * pz));
                        if (j + 4 > last) w = detail::keep_first(w, static_cast<std::int64_t>(last - j));
                        acc += w;
                        if (want_grad) {
                            gx -= w * px;
                            gy -= w * py;
                            gz -= w * pz;
                        }
                    }
                }
            }
            intensity[b] = detail::hsum(acc);
            if (want_grad) grad_x[b] = Vec3(detail::hsum(gx), detail::hsum(gy), detail::hsum(gz));
            if (!counts.empty()) counts[b] = count;
        }
    });
}

double FieldEvaluator::evaluate_dense(const Vec3& x) const {
    double acc = 0.0;
    const std::size_t n = size();
    const double x0 = x[0], x1 = x[1], x2 = x[2];
#pragma omp simd reduction(+ : acc)
    for (std::size_t j = 0; j < n; ++j) {
        const double dx = x0 - mx_[j], dy = x1 - my_[j], dz = x2 - mz_[j];
        const double q = p00_[j] * dx * dx + p11_[j] * dy * dy + p22_[j] * dz * dz +
                         2.0 * (p01_[j] * dx * dy + p02_[j] * dx * dz + p12_[j] * dy * dz);
        acc += alpha_packed_[j] * exp_nonpositive(-0.5 * q);
    }
    return acc;
}

void FieldEvaluator::accumulate_gradients(std::span<const Vec3> points, std::span<const double> upstream,
                                          RenderGradients& out) const {
    using detail::V4d;
    const PartitionGrid& g = *grid_;
    const std::size_t n = size();
    if (out.d_intensity_logits.size() != n) {
        throw Error(ErrorCode::ShapeMismatch, "gradient buffers do not match the field size");
    }
    std::vector<Vec3> active;
    std::vector<double> active_up;
    for (std::size_t b = 0; b < points.size(); ++b) {
        if (upstream[b] != 0.0) {
            active.push_back(points[b]);
            active_up.push_back(upstream[b]);
        }
    }
    const int res = g.grid_resolution;
    // Samples bucketed on the same grid: primitive i sees sample b exactly
    // when b sees i, so visiting each occupied sample cell's neighborhood
    // covers every contributing pair once.
    const PartitionGrid samples = build_partition(active, res, g.block_radius);
    std::vector<std::uint32_t> cells;
    for (std::size_t c = 0; c < samples.cell_count(); ++c) {
        if (samples.offsets[c + 1] > samples.offsets[c]) cells.push_back(static_cast<std::uint32_t>(c));
    }

    // Per primitive (grid order): sum w, sum w d, sum w d d^T with
    // w = upstream * exp(-q/2), d = x - mu.
    constexpr int kSums = 10;
    const std::size_t stride = n + kLanePad;
    std::vector<double> sums(kSums * stride, 0.0);
    double* s[kSums];
    for (int k = 0; k < kSums; ++k) s[k] = sums.data() + k * stride;
    const double* mx = mx_.data();
    const double* my = my_.data();
    const double* mz = mz_.data();
    const double* p00 = p00_.data();
    const double* p01 = p01_.data();
    const double* p02 = p02_.data();
    const double* p11 = p11_.data();
    const double* p12 = p12_.data();
    const double* p22 = p22_.data();

    // Workers own disjoint z-slabs of primitive cells and visit sample cells
    // in flat order, so each primitive's sums are formed in the same order
    // for any thread count.
    const auto slabs = split_range(static_cast<std::size_t>(res),
                                   std::min<std::size_t>(static_cast<std::size_t>(res),
                                                         static_cast<std::size_t>(thread_count())));
    parallel_chunks(slabs, [&](std::size_t, std::size_t z0, std::size_t z1) {
        // Masked lanes past a row may only touch primitives this worker owns.
        const std::size_t owned_end = z1 >= static_cast<std::size_t>(res)
                                          ? stride
                                          : g.offsets[g.flat({0, 0, static_cast<int>(z1)})];
        for (std::uint32_t cell : cells) {
            CellBox box = g.neighborhood(unflatten(cell, res));
            box.lo[2] = std::max(box.lo[2], static_cast<int>(z0));
            box.hi[2] = std::min(box.hi[2], static_cast<int>(z1) - 1);
            for (int z = box.lo[2]; z <= box.hi[2]; ++z) {
                for (int y = box.lo[1]; y <= box.hi[1]; ++y) {
                    const std::size_t first = g.offsets[g.flat({box.lo[0], y, z})];
                    const std::size_t last = g.offsets[g.flat({box.hi[0], y, z}) + 1];
                    if (first == last) continue;
                    const std::size_t vec_end = last + 3 < owned_end ? last : first + (last - first) / 4 * 4;
                    for (std::uint32_t q = samples.offsets[cell]; q < samples.offsets[cell + 1]; ++q) {
                        const std::uint32_t b = samples.indices[q];
                        const double sx = active[b][0], sy = active[b][1], sz = active[b][2];
                        const double up = active_up[b];
                        std::size_t j = first;
                        for (; j < vec_end; j += 4) {
                            const V4d dx = sx - detail::load4(mx + j);
                            const V4d dy = sy - detail::load4(my + j);
                            const V4d dz = sz - detail::load4(mz + j);
                            const V4d q2 = detail::load4(p00 + j) * dx * dx + detail::load4(p11 + j) * dy * dy +
                                           detail::load4(p22 + j) * dz * dz +
                                           2.0 * (detail::load4(p01 + j) * dx * dy + detail::load4(p02 + j) * dx * dz +
                                                  detail::load4(p12 + j) * dy * dz);
                            V4d w = up * detail::exp_nonpositive(-0.5 * q2);
                            if (j + 4 > last) w = detail::keep_first(w, static_cast<std::int64_t>(last - j));
                            const V4d terms[kSums] = {w,           w * dx,      w * dy,      w * dz,      w * dx * dx,
                                                      w * dx * dy, w * dx * dz, w * dy * dy, w * dy * dz, w * dz * dz};
                            for (int k = 0; k < kSums; ++k) detail::store4(s[k] + j, detail::load4(s[k] + j) + terms[k]);
                        }
                        for (; j < last; ++j) {
                            const double dx = sx - mx[j], dy = sy - my[j], dz = sz - mz[j];
                            const double q2 = p00[j] * dx * dx + p11[j] * dy * dy + p22[j] * dz * dz +
                                              2.0 * (p01[j] * dx * dy + p02[j] * dx * dz + p12[j] * dy * dz);
                            const double w = up * exp_nonpositive(-0.5 * q2);
                            const double terms[kSums] = {w,           w * dx,      w * dy,      w * dz,      w * dx * dx,
                                                         w * dx * dy, w * dx * dz, w * dy * dy, w * dy * dz, w * dz * dz};
                            for (int k = 0; k < kSums; ++k) s[k][j] += terms[k];
                        }
                    }
                }
            }
        }
    });

    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            double t[kSums];
            bool any = false;
            for (int k = 0; k < kSums; ++k) {
                t[k] = s[k][j];
                any = any || t[k] != 0.0;
            }
            if (!any) continue;
            const std::size_t i = g.indices[j];
            const double alpha = alpha_[i];
            out.d_intensity_logits[i] += alpha * (1.0 - alpha) * t[0];

            const Mat3& p = precision_[i];
            const Vec3 d_mu = alpha * (p * Vec3(t[1], t[2], t[3]));
            for (int a = 0; a < 3; ++a) out.d_positions[3 * i + a] += d_mu[a];

            // dL/dP = -1/2 alpha sum w d d^T, with P = R D R^T.
            Mat3 sdd;
            sdd << t[4], t[5], t[6], t[5], t[7], t[8], t[6], t[8], t[9];
            const Mat3 gp = -0.5 * alpha * sdd;
            const Mat3& r = rotation_[i];
            const Mat3 d_rot = 2.0 * gp * r * inv_var_[i].asDiagonal();
            const Quat4 d_q = rotation_backward(raw_quat_[i], d_rot);
            for (int c = 0; c < 4; ++c) out.d_quaternions[4 * i + c] += d_q[c];

            const Mat3 local = r.transpose() * gp * r;
            for (int a = 0; a < 3; ++a) {
                if (scale_clamped_[i] & (1u << a)) continue;
                out.d_log_scales[3 * i + a] += -2.0 * inv_var_[i][a] * local(a, a);
            }
        }
    });
}

namespace {

void check_slice_ids(std::span<const RigidTransform> transforms, std::span<const SamplePoint> samples) {
    for (const auto& s : samples) {
        if (s.slice_id < 0 || static_cast<std::size_t>(s.slice_id) >= transforms.size()) {
            throw Error(ErrorCode::ShapeMismatch, "sample references slice " + std::to_string(s.slice_id) +
                                                      " but only " + std::to_string(transforms.size()) +
                                                      " transforms are given");
        }
    }
}

}  // namespace

std::vector<Vec3> transform_samples(std::span<const RigidTransform> transforms, std::span<const SamplePoint> samples) {
    check_slice_ids(transforms, samples);
    std::vector<Mat3> rot(transforms.size());
    for (std::size_t k = 0; k < transforms.size(); ++k) rot[k] = quat_to_rotation(transforms[k].rotation_quat);
    std::vector<Vec3> out(samples.size());
    for (std::size_t b = 0; b < samples.size(); ++b) {
        const auto k = static_cast<std::size_t>(samples[b].slice_id);
        out[b] = rot[k] * samples[b].coord + transforms[k].translation;
    }
    return out;
}

void transform_backward(std::span<const RigidTransform> transforms, std::span<const SamplePoint> samples,
                        std::span<const Vec3> grad_points, std::span<double> d_transform_params) {
    check_slice_ids(transforms, samples);
    const std::size_t k_count = transforms.size();
    std::vector<Mat3> d_rot(k_count, Mat3::Zero());
    std::vector<Vec3> d_trans(k_count, Vec3::Zero());
    std::vector<char> touched(k_count, 0);
    for (std::size_t b = 0; b < samples.size(); ++b) {
        const auto k = static_cast<std::size_t>(samples[b].slice_id);
        d_trans[k] += grad_points[b];
        d_rot[k] += grad_points[b] * samples[b].coord.transpose();
        touched[k] = 1;
    }
    for (std::size_t k = 0; k < k_count; ++k) {
        if (!touched[k]) continue;
        const Quat4 dq = rotation_backward(transforms[k].rotation_quat, d_rot[k]);
        double* dst = d_transform_params.data() + kTransformParams * k;
        for (int c = 0; c < 4; ++c) dst[c] += dq[c];
        for (int a = 0; a < 3; ++a) dst[4 + a] += d_trans[k][a];
    }
}

RenderBatch render_points(const GaussianField& field, const PartitionGrid& grid,
                          std::span<const RigidTransform> transforms, std::span<const SamplePoint> samples) {
    const FieldEvaluator eval(field, grid);
    RenderBatch batch;
    batch.points = transform_samples(transforms, samples);
    batch.intensities.resize(samples.size());
    batch.contributor_counts.resize(samples.size());
    eval.evaluate(batch.points, batch.intensities, {}, batch.contributor_counts);
    return batch;
}

RenderGradients render_backward(const GaussianField& field, const PartitionGrid& grid,
                                std::span<const RigidTransform> transforms, std::span<const SamplePoint> samples,
                                std::span<const double> upstream) {
    if (upstream.size() != samples.size()) {
        throw Error(ErrorCode::ShapeMismatch, "upstream length differs from sample count");
    }
    const FieldEvaluator eval(field, grid);
    RenderGradients out;
    out.resize(field.size(), transforms.size());
    const std::vector<Vec3> points = transform_samples(transforms, samples);
    std::vector<double> intensity(points.size());
    std::vector<Vec3> grad_x(points.size());
    eval.evaluate(points, intensity, grad_x);
    for (std::size_t b = 0; b < points.size(); ++b) grad_x[b] *= upstream[b];
    transform_backward(transforms, samples, grad_x, out.d_transform_params);
    eval.accumulate_gradients(points, upstream, out);
    return out;
}

SamplingBox SamplingBox::covering(const Vec3& lo, const Vec3& hi, const Index3& dims) {
    SamplingBox box;
    box.origin = lo;
    for (int a = 0; a < 3; ++a) box.spacing[a] = (hi[a] - lo[a]) / static_cast<double>(dims[a]);
    return box;
}

Volume sample_volume(const GaussianField& field, const PartitionGrid& grid, const ResidualField* residual,
                     const Index3& dims, const SamplingBox& box, std::size_t max_voxels) {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) throw Error(ErrorCode::ShapeMismatch, "sample_volume needs dims >= 1");
    }
    const double voxels = static_cast<double>(dims[0]) * dims[1] * dims[2];
    if (voxels > static_cast<double>(max_voxels)) {
        throw Error(ErrorCode::OutOfMemory, "requested " + std::to_string(static_cast<long long>(voxels)) +
                                                " voxels exceeds the cap of " + std::to_string(max_voxels));
    }
    const FieldEvaluator eval(field, grid);
    Volume vol = Volume::zeros(dims, box.spacing, box.origin);

    const std::size_t plane = static_cast<std::size_t>(dims[0]) * dims[1];
    std::vector<Vec3> pts(plane);
    std::vector<double> values(plane), res(plane);
    for (int z = 0; z < dims[2]; ++z) {
        std::size_t j = 0;
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x, ++j)
                pts[j] = box.origin + box.spacing.cwiseProduct(Vec3(x, y, z));
        eval.evaluate(pts, values);
        if (residual != nullptr) {
            residual->forward(pts, res);
            for (std::size_t i = 0; i < plane; ++i) values[i] += res[i];
        }
        float* dst = vol.data.data() + static_cast<std::size_t>(z) * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<float>(std::clamp(values[i], 0.0, 1.0));
    }
    return vol;
}

}  // namespace mgs
