#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mgs/simdata.hpp"
#include "mgs/train.hpp"

namespace mgs {

/// Phantom and acquisition settings for `simulate`.
struct SimConfig {
    PhantomKind phantom = PhantomKind::NestedEllipsoids;
    int phantom_size = 64;
    std::vector<Orientation> stacks{Orientation::Axial, Orientation::Coronal, Orientation::Sagittal};
    double in_plane_spacing = 1.0;
    double slice_thickness = 4.0;
    double slice_gap = 0.0;
    double motion_sigma = 1.0;
    double noise_sigma = 0.01;
    double registration_sigma = 0.0;

    bool operator==(const SimConfig&) const = default;
};

/// Settings for `bench`.
struct BenchConfig {
    std::vector<int> radii{3, 4, 5, 6, 7};
    std::vector<int> resolutions{24, 32, 40, 48};
    int perf_lattice = 59;               // 59^3 = 205,379 primitives
    int perf_queries = 1000000;
    int perf_dense_queries = 2000;       // dense timing subsample, extrapolated linearly

    bool operator==(const BenchConfig&) const = default;
};

struct RunConfig {
    TrainConfig train;
    SimConfig sim;
    BenchConfig bench;
    double foreground_threshold = kDefaultForegroundThreshold;
    int output_size = 0;  // 0: the ground-truth grid

    bool operator==(const RunConfig&) const = default;
};

/// Parses "key = value" lines; '#' starts a comment. Unlisted keys keep
/// their defaults. Throws ParseError (with line and column), UnknownKey or
/// OutOfRangeValue.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Text that parse_config maps back to an equal config.
std::string to_config_text(const RunConfig& cfg);

/// Reduced settings that finish on a laptop CPU: 64^3 phantom, lattice
/// 16^3 -> 48^3 over 1500 iterations, residual field from iteration 600.
RunConfig desk_config();

std::string schedule_to_string(const std::vector<ScheduleEntry>& schedule);

}  // namespace mgs
