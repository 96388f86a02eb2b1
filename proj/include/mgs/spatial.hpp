#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mgs/core.hpp"

namespace mgs {

/// floor((mu + 1) * G / 2) per axis, clamped into [0, G - 1].
Index3 cell_index(const Vec3& mu, int grid_resolution);

/// Inclusive cell range of a block neighborhood, truncated at the grid boundary.
struct CellBox {
    Index3 lo{0, 0, 0};
    Index3 hi{0, 0, 0};
};

/// Uniform G^3 bucket grid over [-1, 1]^3. Buckets are stored compactly:
/// `indices` holds primitive ids sorted by cell, and cell c owns
/// indices[offsets[c], offsets[c + 1]). Cells are flattened x-fastest, so
/// the cells of a neighborhood row map to one contiguous index range.
struct PartitionGrid {
    int grid_resolution = 1;
    int block_radius = 5;
    std::size_t primitive_count = 0;
    std::vector<std::uint32_t> offsets;
    std::vector<std::uint32_t> indices;
    std::vector<std::uint32_t> cell_of;  // flattened cell of each primitive

    std::size_t cell_count() const {
        return static_cast<std::size_t>(grid_resolution) * grid_resolution * grid_resolution;
    }
    std::size_t flat(const Index3& c) const {
        return (static_cast<std::size_t>(c[2]) * grid_resolution + c[1]) * grid_resolution + c[0];
    }
    std::span<const std::uint32_t> bucket(const Index3& c) const {
        const std::size_t f = flat(c);
        return {indices.data() + offsets[f], indices.data() + offsets[f + 1]};
    }
    CellBox neighborhood(const Index3& center) const;
};

PartitionGrid build_partition(const GaussianField& field, int grid_resolution, int block_radius);

/// Generic bucketing of arbitrary points; used for both primitives and samples.
PartitionGrid build_partition(std::span<const Vec3> points, int grid_resolution, int block_radius);

/// Primitives whose cell lies within block_radius (Chebyshev, in cells) of
/// the query's cell. Duplicate-free; order follows cell traversal.
std::vector<std::uint32_t> query_local(const PartitionGrid& grid, const Vec3& x);

}  // namespace mgs
