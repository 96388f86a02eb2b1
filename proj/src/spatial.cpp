#include "mgs/spatial.hpp"

#include <algorithm>
#include <cmath>

namespace mgs {

Index3 cell_index(const Vec3& mu, int grid_resolution) {
    Index3 c;
    const double g = static_cast<double>(grid_resolution);
    for (int a = 0; a < 3; ++a) {
        double v = std::floor((mu[a] + 1.0) * g / 2.0);
        if (!(v >= 0.0)) v = 0.0;  // also catches NaN
        if (v > g - 1.0) v = g - 1.0;
        c[a] = static_cast<int>(v);
    }
    return c;
}

CellBox PartitionGrid::neighborhood(const Index3& center) const {
    CellBox box;
    for (int a = 0; a < 3; ++a) {
        box.lo[a] = std::max(0, center[a] - block_radius);
        box.hi[a] = std::min(grid_resolution - 1, center[a] + block_radius);
    }
    return box;
}

namespace {

template <typename PositionFn>
PartitionGrid bucket_points(std::size_t n, PositionFn&& position, int grid_resolution, int block_radius) {
    PartitionGrid grid;
    grid.grid_resolution = std::max(1, grid_resolution);
    grid.block_radius = std::max(0, block_radius);
    grid.primitive_count = n;
    grid.cell_of.resize(n);
    grid.offsets.assign(grid.cell_count() + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::uint32_t>(grid.flat(cell_index(position(i), grid.grid_resolution)));
        grid.cell_of[i] = c;
        ++grid.offsets[c + 1];
    }
    for (std::size_t c = 0; c < grid.cell_count(); ++c) grid.offsets[c + 1] += grid.offsets[c];
    grid.indices.resize(n);
    std::vector<std::uint32_t> cursor(grid.offsets.begin(), grid.offsets.end() - 1);
    for (std::size_t i = 0; i < n; ++i) grid.indices[cursor[grid.cell_of[i]]++] = static_cast<std::uint32_t>(i);
    return grid;
}

}  // namespace

PartitionGrid build_partition(const GaussianField& field, int grid_resolution, int block_radius) {
    return bucket_points(field.size(), [&](std::size_t i) { return field.position(i); }, grid_resolution,
                         block_radius);
}

PartitionGrid build_partition(std::span<const Vec3> points, int grid_resolution, int block_radius) {
    return bucket_points(points.size(), [&](std::size_t i) { return points[i]; }, grid_resolution, block_radius);
}

std::vector<std::uint32_t> query_local(const PartitionGrid& grid, const Vec3& x) {
    const CellBox box = grid.neighborhood(cell_index(x, grid.grid_resolution));
    std::vector<std::uint32_t> out;
    for (int z = box.lo[2]; z <= box.hi[2]; ++z)
        for (int y = box.lo[1]; y <= box.hi[1]; ++y) {
            const std::size_t first = grid.flat({box.lo[0], y, z});
            const std::size_t last = grid.flat({box.hi[0], y, z});
            out.insert(out.end(), grid.indices.begin() + grid.offsets[first],
                       grid.indices.begin() + grid.offsets[last + 1]);
        }
    return out;
}

}  // namespace mgs
