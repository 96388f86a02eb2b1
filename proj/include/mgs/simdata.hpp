#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgs/core.hpp"
#include "mgs/volume.hpp"

namespace mgs {

enum class Orientation { Axial, Coronal, Sagittal };

std::string_view to_string(Orientation o);
Orientation orientation_from_string(std::string_view s);

/// In-plane axes (u, v) and slice normal for an orientation, as world axis
/// indices: axial (x, y | z), coronal (x, z | y), sagittal (y, z | x).
std::array<int, 3> orientation_axes(Orientation o);

enum class PhantomKind { NestedEllipsoids, CheckerShell };

std::string_view to_string(PhantomKind k);
PhantomKind phantom_from_string(std::string_view s);

/// Rigid motion in world millimetres about a pivot:
/// p -> R (p - pivot) + pivot + translation.
struct RigidMotion {
    Quat4 rotation = Quat4(1, 0, 0, 0);
    Vec3 translation_mm = Vec3::Zero();
    Vec3 pivot_mm = Vec3::Zero();

    Vec3 apply(const Vec3& p) const;
};

/// Rotation from Euler angles in degrees, applied x then y then z.
Quat4 quat_from_euler_deg(const Vec3& angles_deg);

struct SliceStack {
    Orientation orientation = Orientation::Axial;
    std::vector<Image2D> slices;
    double in_plane_spacing = 1.0;
    double slice_thickness = 1.0;
    double slice_gap = 0.0;
    /// World position of pixel (0, 0) of slice 0, on the slab's center plane.
    Vec3 origin = Vec3::Zero();
    /// Columns: in-plane u axis, in-plane v axis, slice normal (all unit length).
    Mat3 axes = Mat3::Identity();
    std::vector<RigidMotion> true_motion;       // simulator ground truth, may be empty
    std::vector<RigidMotion> estimated_motion;  // what the reconstructor is given

    double slice_pitch() const { return slice_thickness + slice_gap; }
    int width() const { return slices.empty() ? 0 : slices.front().width; }
    int height() const { return slices.empty() ? 0 : slices.front().height; }
    Vec3 pixel_world(int slice, double u, double v) const;
    std::size_t voxel_count() const { return slices.size() * static_cast<std::size_t>(width()) * height(); }

    /// Throws GeometryMismatch when slices disagree in shape or thickness is
    /// below the in-plane spacing.
    void validate() const;
};

/// Deterministic phantom in [0, 1] with 1 mm voxels and origin at 0.
/// Throws GeometryMismatch for dims below 16.
Volume make_phantom(PhantomKind kind, const Index3& dims, std::uint64_t seed);

struct AcquisitionParams {
    Orientation orientation = Orientation::Axial;
    double in_plane_spacing = 1.0;
    double slice_thickness = 4.0;
    double slice_gap = 0.0;
    double motion_sigma = 0.0;  // degrees for rotations, mm for translations
    double noise_sigma = 0.0;
    double registration_sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Number of slabs that fit along an extent of `length` mm.
int slice_count(double length, double thickness, double gap);

/// Weights of the through-plane slab profile (Gaussian, FWHM = thickness)
/// at the given offsets from the slab center, normalized to sum to one.
std::vector<double> slab_weights(std::span<const double> offsets, double thickness);

SliceStack acquire_stack(const Volume& gt, const AcquisitionParams& params);

/// World millimetres <-> canonical [-1, 1]^3 coordinates, plus the intensity
/// scale that maps raw stack values to unit range.
struct NormalizationRecord {
    Vec3 center_mm = Vec3::Zero();
    double scale = 1.0;  // normalized units per mm
    double intensity_scale = 1.0;
    Vec3 bbox_lo_mm = Vec3::Zero();
    Vec3 bbox_hi_mm = Vec3::Zero();

    Vec3 to_normalized(const Vec3& world) const { return (world - center_mm) * scale; }
    Vec3 to_world(const Vec3& normalized) const { return normalized / scale + center_mm; }
};

/// Every pixel of one acquired slice, normalized; used for slice-wise SSIM.
struct SliceRecord {
    int stack = 0;
    int index = 0;
    int width = 0;
    int height = 0;
    std::vector<Vec3> coords;
    std::vector<double> intensities;
};

struct Dataset {
    std::vector<SamplePoint> samples;
    NormalizationRecord normalization;
    std::vector<SliceRecord> slices;                  // by global slice id
    std::vector<RigidTransform> initial_transforms;   // from estimated motion
    std::vector<RigidTransform> true_transforms;      // empty unless true motion is known
};

inline constexpr double kDefaultForegroundThreshold = 0.02;
inline constexpr double kNormalizedHalfExtent = 0.98;

/// Converts a world-space motion into the transform acting on normalized
/// scanner coordinates.
RigidTransform motion_to_normalized(const RigidMotion& motion, const NormalizationRecord& norm, int slice_id);

/// Builds the training point cloud. Throws EmptyForeground when no voxel
/// exceeds the threshold, GeometryMismatch for an empty stack list.
Dataset devoxelize(std::span<const SliceStack> stacks, double foreground_threshold = kDefaultForegroundThreshold);

}  // namespace mgs
