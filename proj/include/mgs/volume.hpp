#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "mgs/core.hpp"

namespace mgs {

using Affine3x4 = Eigen::Matrix<double, 3, 4>;

/// Dense scalar 3D image, x fastest. Geometry follows the NIfTI sform
/// convention: world = direction * diag(spacing) * ijk + origin, where
/// origin is the world position of the center of voxel (0, 0, 0).
struct Volume {
    Index3 dims{0, 0, 0};
    Vec3 spacing = Vec3::Ones();
    Vec3 origin = Vec3::Zero();
    Mat3 direction = Mat3::Identity();
    std::vector<float> data;

    static Volume zeros(const Index3& dims, const Vec3& spacing = Vec3::Ones(), const Vec3& origin = Vec3::Zero());

    std::size_t voxel_count() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
    }
    float& at(int x, int y, int z) { return data[index(x, y, z)]; }
    float at(int x, int y, int z) const { return data[index(x, y, z)]; }

    Affine3x4 affine() const;
    void set_affine(const Affine3x4& a);
    Vec3 voxel_to_world(const Vec3& ijk) const;
    Vec3 world_to_voxel(const Vec3& world) const;
};

/// Trilinear interpolation at a continuous voxel coordinate. Samples outside
/// the grid read as zero (the grid is padded with one ring of zeros).
double sample_trilinear(const Volume& vol, const Vec3& ijk);

/// 2D float image, u (column) fastest.
struct Image2D {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    Image2D() = default;
    Image2D(int w, int h, float fill = 0.0f) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    float& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
    float at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
    std::size_t size() const { return data.size(); }
};

}  // namespace mgs
