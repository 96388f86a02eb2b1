#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mgs/error.hpp"

namespace mgs {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// Quaternion stored as (w, x, y, z). Kept as a plain 4-vector because the
/// optimizer treats it as four unconstrained reals.
using Quat4 = Eigen::Vector4d;
using Index3 = std::array<int, 3>;

/// position (3) + rotation (4) + log-scale (3) + intensity (1)
inline constexpr int kParamsPerPrimitive = 11;
inline constexpr double kMaxLogScale = 20.0;
inline constexpr double kMinQuaternionNorm = 1e-12;

double sigmoid(double x);
/// Inverse of sigmoid; p is clamped into (1e-6, 1 - 1e-6) first.
double logit(double p);

/// Coordinate of lattice node i on an R-node axis spanning [-1, 1] (corners included).
double lattice_node(int i, int resolution);
double lattice_spacing(int resolution);

struct Primitive {
    Vec3 position = Vec3::Zero();
    Quat4 rotation = Quat4(1, 0, 0, 0);
    Vec3 log_scale = Vec3::Zero();
    double intensity_logit = 0.0;
};

/// Structure-of-arrays store for N Magnetic Gaussians. Quaternions are kept
/// unnormalized; every consumer normalizes them on read.
struct GaussianField {
    std::vector<double> positions;         // N x 3
    std::vector<double> quaternions;       // N x 4, (w, x, y, z)
    std::vector<double> log_scales;        // N x 3
    std::vector<double> intensity_logits;  // N
    Index3 lattice_dims{0, 0, 0};
    std::vector<Index3> lattice_index;     // N

    std::size_t size() const { return intensity_logits.size(); }
    bool empty() const { return intensity_logits.empty(); }

    Vec3 position(std::size_t i) const { return {positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]}; }
    Quat4 quaternion(std::size_t i) const {
        return {quaternions[4 * i], quaternions[4 * i + 1], quaternions[4 * i + 2], quaternions[4 * i + 3]};
    }
    Vec3 log_scale(std::size_t i) const { return {log_scales[3 * i], log_scales[3 * i + 1], log_scales[3 * i + 2]}; }
    double intensity(std::size_t i) const { return sigmoid(intensity_logits[i]); }

    void set_position(std::size_t i, const Vec3& p);
    void set_quaternion(std::size_t i, const Quat4& q);
    void set_log_scale(std::size_t i, const Vec3& s);
    Primitive primitive(std::size_t i) const;

    /// Throws ShapeMismatch when array lengths or lattice topology disagree.
    void validate() const;

    /// R0 x R1 x R2 lattice: nodes at uniform positions, identity rotations,
    /// one standard deviation equal to half the node spacing, zero logits.
    static GaussianField uniform_lattice(const Index3& dims);
    /// Free-standing primitives; lattice_dims becomes (N, 1, 1).
    static GaussianField from_primitives(std::span<const Primitive> prims);
};

/// Rotation matrix of q / |q|. Throws DegenerateQuaternion for |q| <= 1e-12.
Mat3 quat_to_rotation(const Quat4& q);

/// dR/dq_c for a unit quaternion, c = w, x, y, z.
std::array<Mat3, 4> rotation_jacobian(const Quat4& unit_q);

/// Maps dL/d(q/|q|) to dL/dq.
Quat4 normalize_backward(const Quat4& q, const Quat4& grad_unit);

/// dL/dq given q (unnormalized) and dL/dR.
Quat4 rotation_backward(const Quat4& q, const Mat3& grad_rotation);

Quat4 quat_multiply(const Quat4& a, const Quat4& b);
Quat4 quat_conjugate(const Quat4& q);
/// Unit quaternion for a rotation matrix (Shepperd's method).
Quat4 quat_from_rotation(const Mat3& r);

struct Covariance {
    Mat3 rotation;
    Vec3 scale_diag;
    Mat3 precision;

    Mat3 covariance() const;
};

/// Precision R diag(exp(-2s)) R^T, assembled analytically.
/// Throws DegenerateQuaternion or ScaleOverflow (any |s_i| > 20).
Covariance assemble_precision(const Quat4& q, const Vec3& log_scale);

/// One devoxelized observation: normalized scanner coordinate, unit-range
/// intensity and the global id of the slice it came from.
struct SamplePoint {
    Vec3 coord = Vec3::Zero();
    double intensity = 0.0;
    int slice_id = 0;
};

struct RigidTransform {
    Quat4 rotation_quat = Quat4(1, 0, 0, 0);
    Vec3 translation = Vec3::Zero();
    int slice_id = 0;

    static RigidTransform identity(int slice_id = 0) {
        RigidTransform t;
        t.slice_id = slice_id;
        return t;
    }
};

/// R(t) x + translation.
Vec3 apply_rigid(const RigidTransform& t, const Vec3& x);
/// (a o b)(x) = a(b(x)). Keeps a's slice id.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& t);

}  // namespace mgs
