#include "mgs/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mgs {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DegenerateQuaternion: return "DegenerateQuaternion";
        case ErrorCode::ScaleOverflow: return "ScaleOverflow";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::InconsistentGrid: return "InconsistentGrid";
        case ErrorCode::OutOfMemory: return "OutOfMemory";
        case ErrorCode::UninitializedField: return "UninitializedField";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::SliceTooSmall: return "SliceTooSmall";
        case ErrorCode::ShrinkNotAllowed: return "ShrinkNotAllowed";
        case ErrorCode::GeometryMismatch: return "GeometryMismatch";
        case ErrorCode::EmptyForeground: return "EmptyForeground";
        case ErrorCode::ConstantInput: return "ConstantInput";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
        case ErrorCode::TruncatedPayload: return "TruncatedPayload";
        case ErrorCode::EndianMismatch: return "EndianMismatch";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::UnknownKey: return "UnknownKey";
        case ErrorCode::OutOfRangeValue: return "OutOfRangeValue";
        case ErrorCode::Usage: return "Usage";
    }
    return "Unknown";
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::Usage: return 1;
        case ErrorCode::DegenerateQuaternion:
        case ErrorCode::ScaleOverflow:
        case ErrorCode::NonFiniteLoss: return 3;
        default: return 2;
    }
}

double sigmoid(double x) {
    if (x >= 0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) {
    p = std::clamp(p, 1e-6, 1.0 - 1e-6);
    return std::log(p / (1.0 - p));
}

double lattice_node(int i, int resolution) {
    if (resolution <= 1) return 0.0;
    return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(resolution - 1);
}

double lattice_spacing(int resolution) {
    return resolution <= 1 ? 2.0 : 2.0 / static_cast<double>(resolution - 1);
}

void GaussianField::set_position(std::size_t i, const Vec3& p) {
    for (int k = 0; k < 3; ++k) positions[3 * i + k] = p[k];
}

void GaussianField::set_quaternion(std::size_t i, const Quat4& q) {
    for (int k = 0; k < 4; ++k) quaternions[4 * i + k] = q[k];
}

void GaussianField::set_log_scale(std::size_t i, const Vec3& s) {
    for (int k = 0; k < 3; ++k) log_scales[3 * i + k] = s[k];
}

Primitive GaussianField::primitive(std::size_t i) const {
    return {position(i), quaternion(i), log_scale(i), intensity_logits[i]};
}

void GaussianField::validate() const {
    const std::size_t n = size();
    if (positions.size() != 3 * n || quaternions.size() != 4 * n || log_scales.size() != 3 * n ||
        lattice_index.size() != n) {
        throw Error(ErrorCode::ShapeMismatch, "Gaussian field arrays disagree on primitive count");
    }
    const auto lattice_n = static_cast<std::size_t>(lattice_dims[0]) * lattice_dims[1] * lattice_dims[2];
    if (lattice_n != n) {
        throw Error(ErrorCode::ShapeMismatch, "lattice size " + std::to_string(lattice_n) +
                                                  " does not match primitive count " + std::to_string(n));
    }
}

GaussianField GaussianField::uniform_lattice(const Index3& dims) {
    GaussianField f;
    f.lattice_dims = dims;
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    f.positions.resize(3 * n);
    f.quaternions.resize(4 * n);
    f.log_scales.resize(3 * n);
    f.intensity_logits.assign(n, 0.0);
    f.lattice_index.resize(n);
    Vec3 s;
    for (int a = 0; a < 3; ++a) s[a] = std::log(0.5 * lattice_spacing(dims[a]));
    std::size_t i = 0;
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x, ++i) {
                f.lattice_index[i] = {x, y, z};
                f.set_position(i, Vec3(lattice_node(x, dims[0]), lattice_node(y, dims[1]), lattice_node(z, dims[2])));
                f.set_quaternion(i, Quat4(1, 0, 0, 0));
                f.set_log_scale(i, s);
            }
    return f;
}

GaussianField GaussianField::from_primitives(std::span<const Primitive> prims) {
    GaussianField f;
    const std::size_t n = prims.size();
    f.lattice_dims = {static_cast<int>(n), 1, 1};
    f.positions.resize(3 * n);
    f.quaternions.resize(4 * n);
    f.log_scales.resize(3 * n);
    f.intensity_logits.resize(n);
    f.lattice_index.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        f.set_position(i, prims[i].position);
        f.set_quaternion(i, prims[i].rotation);
        f.set_log_scale(i, prims[i].log_scale);
        f.intensity_logits[i] = prims[i].intensity_logit;
        f.lattice_index[i] = {static_cast<int>(i), 0, 0};
    }
    return f;
}

namespace {

Mat3 rotation_of_unit(const Quat4& u) {
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Quat4 checked_unit(const Quat4& q) {
    const double n = q.norm();
    if (!(n > kMinQuaternionNorm)) {
        throw Error(ErrorCode::DegenerateQuaternion, "quaternion norm " + std::to_string(n) + " is too small");
    }
    return q / n;
}

}  // namespace

Mat3 quat_to_rotation(const Quat4& q) { return rotation_of_unit(checked_unit(q)); }

std::array<Mat3, 4> rotation_jacobian(const Quat4& u) {
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    std::array<Mat3, 4> d;
    d[0] << 0, -z, y,
            z, 0, -x,
            -y, x, 0;
    d[1] << 0, y, z,
            y, -2 * x, -w,
            z, w, -2 * x;
    d[2] << -2 * y, x, w,
            x, 0, z,
            -w, z, -2 * y;
    d[3] << -2 * z, -w, x,
            w, -2 * z, y,
            x, y, 0;
    for (auto& m : d) m *= 2.0;
    return d;
}

Quat4 normalize_backward(const Quat4& q, const Quat4& grad_unit) {
    const double n = q.norm();
    const Quat4 u = q / n;
    return (grad_unit - u * u.dot(grad_unit)) / n;
}

Quat4 rotation_backward(const Quat4& q, const Mat3& grad_rotation) {
    const Quat4 u = checked_unit(q);
    const auto jac = rotation_jacobian(u);
    Quat4 gu;
    for (int c = 0; c < 4; ++c) gu[c] = jac[c].cwiseProduct(grad_rotation).sum();
    return normalize_backward(q, gu);
}

Quat4 quat_multiply(const Quat4& a, const Quat4& b) {
    return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
            a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
            a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
            a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

Quat4 quat_conjugate(const Quat4& q) { return {q[0], -q[1], -q[2], -q[3]}; }

Quat4 quat_from_rotation(const Mat3& r) {
    Quat4 q;
    const double tr = r.trace();
    if (tr > 0) {
        const double s = std::sqrt(tr + 1.0) * 2;
        q << 0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s;
    } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
        const double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2;
        q << (r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s;
    } else if (r(1, 1) > r(2, 2)) {
        const double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2;
        q << (r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s;
    } else {
        const double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2;
        q << (r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s;
    }
    if (q[0] < 0) q = -q;
    return q.normalized();
}

Mat3 Covariance::covariance() const {
    const Vec3 var = scale_diag.array().square();
    return rotation * var.asDiagonal() * rotation.transpose();
}

Covariance assemble_precision(const Quat4& q, const Vec3& log_scale) {
    for (int k = 0; k < 3; ++k) {
        if (!(std::abs(log_scale[k]) <= kMaxLogScale)) {
            throw Error(ErrorCode::ScaleOverflow, "log-scale " + std::to_string(log_scale[k]) + " exceeds 20");
        }
    }
    Covariance c;
    c.rotation = quat_to_rotation(q);
    c.scale_diag = log_scale.array().exp();
    const Vec3 inv_var = (-2.0 * log_scale.array()).exp();
    c.precision = c.rotation * inv_var.asDiagonal() * c.rotation.transpose();
    return c;
}

Vec3 apply_rigid(const RigidTransform& t, const Vec3& x) {
    return quat_to_rotation(t.rotation_quat) * x + t.translation;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.slice_id = a.slice_id;
    out.rotation_quat = quat_multiply(checked_unit(a.rotation_quat), checked_unit(b.rotation_quat)).normalized();
    out.translation = quat_to_rotation(a.rotation_quat) * b.translation + a.translation;
    return out;
}

RigidTransform inverse(const RigidTransform& t) {
    RigidTransform out;
    out.slice_id = t.slice_id;
    out.rotation_quat = quat_conjugate(checked_unit(t.rotation_quat));
    out.translation = -(quat_to_rotation(t.rotation_quat).transpose() * t.translation);
    return out;
}

}  // namespace mgs
