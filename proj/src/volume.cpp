#include "mgs/volume.hpp"

#include <cmath>

namespace mgs {

Volume Volume::zeros(const Index3& dims, const Vec3& spacing, const Vec3& origin) {
    Volume v;
    v.dims = dims;
    v.spacing = spacing;
    v.origin = origin;
    v.data.assign(v.voxel_count(), 0.0f);
    return v;
}

Affine3x4 Volume::affine() const {
    Affine3x4 a;
    a.leftCols<3>() = direction * spacing.asDiagonal();
    a.col(3) = origin;
    return a;
}

void Volume::set_affine(const Affine3x4& a) {
    const Mat3 m = a.leftCols<3>();
    for (int k = 0; k < 3; ++k) {
        spacing[k] = m.col(k).norm();
        direction.col(k) = spacing[k] > 0 ? Vec3(m.col(k) / spacing[k]) : Vec3::Unit(k);
    }
    origin = a.col(3);
}

Vec3 Volume::voxel_to_world(const Vec3& ijk) const { return direction * spacing.cwiseProduct(ijk) + origin; }

Vec3 Volume::world_to_voxel(const Vec3& world) const {
    return (direction.transpose() * (world - origin)).cwiseQuotient(spacing);
}

double sample_trilinear(const Volume& vol, const Vec3& ijk) {
    int base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
        const double f = std::floor(ijk[a]);
        if (f < -1.0 || f > vol.dims[a] - 1.0) return 0.0;
        base[a] = static_cast<int>(f);
        frac[a] = ijk[a] - f;
    }
    auto value = [&](int x, int y, int z) -> double {
        if (x < 0 || y < 0 || z < 0 || x >= vol.dims[0] || y >= vol.dims[1] || z >= vol.dims[2]) return 0.0;
        return vol.at(x, y, z);
    };
    double out = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        const double wz = dz ? frac[2] : 1.0 - frac[2];
        if (wz == 0.0) continue;
        for (int dy = 0; dy < 2; ++dy) {
            const double wy = dy ? frac[1] : 1.0 - frac[1];
            if (wy == 0.0) continue;
            for (int dx = 0; dx < 2; ++dx) {
                const double wx = dx ? frac[0] : 1.0 - frac[0];
                if (wx == 0.0) continue;
                out += wx * wy * wz * value(base[0] + dx, base[1] + dy, base[2] + dz);
            }
        }
    }
    return out;
}

}  // namespace mgs
