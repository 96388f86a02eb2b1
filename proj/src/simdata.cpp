#include "mgs/simdata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace mgs {

std::string_view to_string(Orientation o) {
    switch (o) {
        case Orientation::Axial: return "axial";
        case Orientation::Coronal: return "coronal";
        case Orientation::Sagittal: return "sagittal";
    }
    return "axial";
}

Orientation orientation_from_string(std::string_view s) {
    if (s == "axial") return Orientation::Axial;
    if (s == "coronal") return Orientation::Coronal;
    if (s == "sagittal") return Orientation::Sagittal;
    throw Error(ErrorCode::ParseError, "unknown orientation '" + std::string(s) + "'");
}

std::array<int, 3> orientation_axes(Orientation o) {
    switch (o) {
        case Orientation::Axial: return {0, 1, 2};
        case Orientation::Coronal: return {0, 2, 1};
        case Orientation::Sagittal: return {1, 2, 0};
    }
    return {0, 1, 2};
}

std::string_view to_string(PhantomKind k) {
    return k == PhantomKind::NestedEllipsoids ? "nested-ellipsoids" : "checker-shell";
}

PhantomKind phantom_from_string(std::string_view s) {
    if (s == "nested-ellipsoids") return PhantomKind::NestedEllipsoids;
    if (s == "checker-shell") return PhantomKind::CheckerShell;
    throw Error(ErrorCode::ParseError, "unknown phantom kind '" + std::string(s) + "'");
}

Vec3 RigidMotion::apply(const Vec3& p) const {
    return quat_to_rotation(rotation) * (p - pivot_mm) + pivot_mm + translation_mm;
}

Quat4 quat_from_euler_deg(const Vec3& angles_deg) {
    const Vec3 half = angles_deg * (std::numbers::pi / 360.0);
    const Quat4 qx(std::cos(half[0]), std::sin(half[0]), 0, 0);
    const Quat4 qy(std::cos(half[1]), 0, std::sin(half[1]), 0);
    const Quat4 qz(std::cos(half[2]), 0, 0, std::sin(half[2]));
    return quat_multiply(qz, quat_multiply(qy, qx));
}

Vec3 SliceStack::pixel_world(int slice, double u, double v) const {
    return origin + axes.col(0) * (u * in_plane_spacing) + axes.col(1) * (v * in_plane_spacing) +
           axes.col(2) * (slice * slice_pitch());
}

void SliceStack::validate() const {
    if (slices.empty()) throw Error(ErrorCode::GeometryMismatch, "stack has no slices");
    for (const auto& s : slices) {
        if (s.width != width() || s.height != height() || s.data.size() != s.size()) {
            throw Error(ErrorCode::GeometryMismatch, "stack slices differ in shape");
        }
    }
    if (!(in_plane_spacing > 0) || slice_thickness < in_plane_spacing || slice_gap < 0) {
        throw Error(ErrorCode::GeometryMismatch, "stack spacing/thickness/gap is inconsistent");
    }
    if ((!true_motion.empty() && true_motion.size() != slices.size()) ||
        (!estimated_motion.empty() && estimated_motion.size() != slices.size())) {
        throw Error(ErrorCode::GeometryMismatch, "per-slice motion list length differs from slice count");
    }
}

namespace {

double ellipsoid(const Vec3& p, const Vec3& c, const Vec3& r) { return (p - c).cwiseQuotient(r).squaredNorm(); }

struct Blob {
    Vec3 center;
    Vec3 radii;
};

}  // namespace

Volume make_phantom(PhantomKind kind, const Index3& dims, std::uint64_t seed) {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 16) throw Error(ErrorCode::GeometryMismatch, "phantom dims must be >= 16");
    }
    Volume vol = Volume::zeros(dims);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    if (kind == PhantomKind::NestedEllipsoids) {
        const double phase_x = 2.0 * std::numbers::pi * unit(rng);
        const double phase_y = 2.0 * std::numbers::pi * unit(rng);
        std::vector<Blob> blobs;
        while (blobs.size() < 5) {
            const Vec3 c(2 * unit(rng) - 1, 2 * unit(rng) - 1, 2 * unit(rng) - 1);
            const Vec3 r(0.05 + 0.05 * unit(rng), 0.05 + 0.05 * unit(rng), 0.05 + 0.05 * unit(rng));
            if (c.norm() <= 1.0) blobs.push_back({c * 0.45, r});
        }
        const Vec3 outer(0.82, 0.72, 0.78);
        for (int z = 0; z < dims[2]; ++z)
            for (int y = 0; y < dims[1]; ++y)
                for (int x = 0; x < dims[0]; ++x) {
                    const Vec3 p((2.0 * x + 1.0) / dims[0] - 1.0, (2.0 * y + 1.0) / dims[1] - 1.0,
                                 (2.0 * z + 1.0) / dims[2] - 1.0);
                    const double e = ellipsoid(p, Vec3::Zero(), outer);
                    double v = 0.0;
                    if (e > 1.0) {
                        v = 0.0;
                    } else if (e > 0.78) {
                        v = 0.85;  // outer shell
                    } else {
                        v = 0.55 + 0.08 * std::sin(2.5 * p[0] + phase_x) * std::cos(2.0 * p[1] + phase_y);
                        if (e > 0.52 && e < 0.57) v = 0.75;  // thin inner shell
                        for (const double side : {-1.0, 1.0}) {
                            if (ellipsoid(p, Vec3(0.2 * side, 0.05, 0.0), Vec3(0.1, 0.22, 0.14)) < 1.0) v = 0.15;
                        }
                        for (const auto& b : blobs) {
                            if (ellipsoid(p, b.center, b.radii) < 1.0) v = 1.0;
                        }
                    }
                    vol.at(x, y, z) = static_cast<float>(v);
                }
    } else {
        const double phase = unit(rng);
        for (int z = 0; z < dims[2]; ++z)
            for (int y = 0; y < dims[1]; ++y)
                for (int x = 0; x < dims[0]; ++x) {
                    const Vec3 p((2.0 * x + 1.0) / dims[0] - 1.0, (2.0 * y + 1.0) / dims[1] - 1.0,
                                 (2.0 * z + 1.0) / dims[2] - 1.0);
                    const double r = p.norm();
                    double v = 0.0;
                    if (r > 0.8) {
                        v = 0.0;
                    } else if (r > 0.6) {
                        long parity = 0;
                        for (int a = 0; a < 3; ++a) parity += static_cast<long>(std::floor((p[a] + 1.0) * 4.0 + phase));
                        v = (parity % 2 == 0) ? 0.9 : 0.4;
                    } else {
                        v = 0.5 + 0.1 * std::cos(3.0 * r + 2.0 * std::numbers::pi * phase);
                    }
                    vol.at(x, y, z) = static_cast<float>(v);
                }
    }
    return vol;
}

int slice_count(double length, double thickness, double gap) {
    if (length < thickness) return 0;
    return static_cast<int>(std::floor((length - thickness) / (thickness + gap) + 1e-9)) + 1;
}

std::vector<double> slab_weights(std::span<const double> offsets, double thickness) {
    const double sigma = thickness / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
    std::vector<double> w(offsets.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        w[i] = std::exp(-offsets[i] * offsets[i] / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

SliceStack acquire_stack(const Volume& gt, const AcquisitionParams& params) {
    if (!gt.direction.isIdentity(1e-12)) {
        throw Error(ErrorCode::GeometryMismatch, "acquisition expects an axis-aligned ground-truth volume");
    }
    const auto axes = orientation_axes(params.orientation);
    const int au = axes[0], av = axes[1], an = axes[2];
    if (!(params.in_plane_spacing > 0)) throw Error(ErrorCode::GeometryMismatch, "in-plane spacing must be positive");
    if (params.slice_thickness < gt.spacing[an]) {
        throw Error(ErrorCode::GeometryMismatch, "slice thickness is below the ground-truth through-plane spacing");
    }
    if (params.slice_thickness < params.in_plane_spacing) {
        throw Error(ErrorCode::GeometryMismatch, "slice thickness is below the in-plane spacing");
    }

    Vec3 lo_edge, length;
    for (int a = 0; a < 3; ++a) {
        lo_edge[a] = gt.origin[a] - 0.5 * gt.spacing[a];
        length[a] = gt.dims[a] * gt.spacing[a];
    }
    const int nu = static_cast<int>(std::floor(length[au] / params.in_plane_spacing + 1e-9));
    const int nv = static_cast<int>(std::floor(length[av] / params.in_plane_spacing + 1e-9));
    const int ns = slice_count(length[an], params.slice_thickness, params.slice_gap);
    if (nu < 1 || nv < 1 || ns < 1) throw Error(ErrorCode::GeometryMismatch, "stack geometry yields no pixels");

    SliceStack stack;
    stack.orientation = params.orientation;
    stack.in_plane_spacing = params.in_plane_spacing;
    stack.slice_thickness = params.slice_thickness;
    stack.slice_gap = params.slice_gap;
    stack.axes = Mat3::Zero();
    stack.axes(au, 0) = 1.0;
    stack.axes(av, 1) = 1.0;
    stack.axes(an, 2) = 1.0;
    stack.origin = Vec3::Zero();
    stack.origin[au] = lo_edge[au] + 0.5 * params.in_plane_spacing;
    stack.origin[av] = lo_edge[av] + 0.5 * params.in_plane_spacing;
    stack.origin[an] = lo_edge[an] + 0.5 * params.slice_thickness;

    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Vec3 pivot = gt.origin + 0.5 * (gt.dims[0] - 1) * gt.spacing[0] * Vec3::UnitX() +
                       0.5 * (gt.dims[1] - 1) * gt.spacing[1] * Vec3::UnitY() +
                       0.5 * (gt.dims[2] - 1) * gt.spacing[2] * Vec3::UnitZ();
    for (int k = 0; k < ns; ++k) {
        Vec3 angles, shift;
        for (int a = 0; a < 3; ++a) angles[a] = params.motion_sigma * normal(rng);
        for (int a = 0; a < 3; ++a) shift[a] = params.motion_sigma * normal(rng);
        RigidMotion truth{quat_from_euler_deg(angles), shift, pivot};
        Vec3 err_angles, err_shift;
        for (int a = 0; a < 3; ++a) err_angles[a] = params.registration_sigma * normal(rng);
        for (int a = 0; a < 3; ++a) err_shift[a] = params.registration_sigma * normal(rng);
        RigidMotion estimate{quat_from_euler_deg(angles + err_angles), shift + err_shift, pivot};
        stack.true_motion.push_back(truth);
        stack.estimated_motion.push_back(estimate);
    }

    for (int k = 0; k < ns; ++k) {
        const double center = stack.origin[an] + k * stack.slice_pitch();
        // Ground-truth planes whose centers fall inside the slab [c - T/2, c + T/2).
        std::vector<double> offsets;
        const double first = (center - 0.5 * params.slice_thickness - gt.origin[an]) / gt.spacing[an];
        for (int j = static_cast<int>(std::ceil(first - 1e-9)); j < gt.dims[an]; ++j) {
            const double plane = gt.origin[an] + j * gt.spacing[an];
            const double d = plane - center;
            if (d >= 0.5 * params.slice_thickness - 1e-9) break;
            if (d < -0.5 * params.slice_thickness - 1e-9) continue;
            offsets.push_back(d);
        }
        if (offsets.empty()) offsets.push_back(0.0);
        const auto weights = slab_weights(offsets, params.slice_thickness);
        const RigidMotion& motion = stack.true_motion[static_cast<std::size_t>(k)];
        const bool moved = params.motion_sigma != 0.0;

        Image2D img(nu, nv);
        for (int v = 0; v < nv; ++v)
            for (int u = 0; u < nu; ++u) {
                const Vec3 pixel = stack.pixel_world(k, u, v);
                double acc = 0.0;
                for (std::size_t t = 0; t < offsets.size(); ++t) {
                    Vec3 p = pixel + stack.axes.col(2) * offsets[t];
                    if (moved) p = motion.apply(p);
                    acc += weights[t] * sample_trilinear(gt, gt.world_to_voxel(p));
                }
                img.at(u, v) = static_cast<float>(acc);
            }
        stack.slices.push_back(std::move(img));
    }
    if (params.noise_sigma > 0.0) {
        for (auto& img : stack.slices)
            for (float& px : img.data) px = static_cast<float>(px + params.noise_sigma * normal(rng));
    }
    return stack;
}

RigidTransform motion_to_normalized(const RigidMotion& motion, const NormalizationRecord& norm, int slice_id) {
    RigidTransform t;
    t.slice_id = slice_id;
    t.rotation_quat = motion.rotation.normalized();
    const Mat3 r = quat_to_rotation(motion.rotation);
    t.translation =
        norm.scale * (r * (norm.center_mm - motion.pivot_mm) + motion.pivot_mm - norm.center_mm + motion.translation_mm);
    return t;
}

Dataset devoxelize(std::span<const SliceStack> stacks, double foreground_threshold) {
    if (stacks.empty()) throw Error(ErrorCode::GeometryMismatch, "devoxelize needs at least one stack");
    Dataset ds;
    NormalizationRecord& norm = ds.normalization;

    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    double peak = -std::numeric_limits<double>::infinity();
    for (const auto& st : stacks) {
        st.validate();
        const int ns = static_cast<int>(st.slices.size());
        for (int k : {0, ns - 1})
            for (int v : {0, st.height() - 1})
                for (int u : {0, st.width() - 1}) {
                    const Vec3 w = st.pixel_world(k, u, v);
                    lo = lo.cwiseMin(w);
                    hi = hi.cwiseMax(w);
                }
        for (const auto& img : st.slices)
            for (float px : img.data) peak = std::max(peak, static_cast<double>(px));
    }
    if (!(peak > 0.0)) throw Error(ErrorCode::EmptyForeground, "stacks contain no positive intensity");
    norm.bbox_lo_mm = lo;
    norm.bbox_hi_mm = hi;
    norm.center_mm = 0.5 * (lo + hi);
    const double extent = (hi - lo).maxCoeff();
    norm.scale = extent > 0 ? 2.0 * kNormalizedHalfExtent / extent : 1.0;
    norm.intensity_scale = peak;

    int slice_id = 0;
    for (std::size_t s = 0; s < stacks.size(); ++s) {
        const auto& st = stacks[s];
        for (int k = 0; k < static_cast<int>(st.slices.size()); ++k, ++slice_id) {
            SliceRecord rec;
            rec.stack = static_cast<int>(s);
            rec.index = k;
            rec.width = st.width();
            rec.height = st.height();
            rec.coords.reserve(st.slices[k].size());
            rec.intensities.reserve(st.slices[k].size());
            for (int v = 0; v < st.height(); ++v)
                for (int u = 0; u < st.width(); ++u) {
                    const Vec3 coord = norm.to_normalized(st.pixel_world(k, u, v));
                    const double value = std::clamp(st.slices[k].at(u, v) / peak, 0.0, 1.0);
                    rec.coords.push_back(coord);
                    rec.intensities.push_back(value);
                    if (value > foreground_threshold) ds.samples.push_back({coord, value, slice_id});
                }
            ds.slices.push_back(std::move(rec));
            if (!st.estimated_motion.empty()) {
                ds.initial_transforms.push_back(motion_to_normalized(st.estimated_motion[k], norm, slice_id));
            } else {
                ds.initial_transforms.push_back(RigidTransform::identity(slice_id));
            }
            if (!st.true_motion.empty()) ds.true_transforms.push_back(motion_to_normalized(st.true_motion[k], norm, slice_id));
        }
    }
    if (ds.true_transforms.size() != ds.initial_transforms.size()) ds.true_transforms.clear();
    if (ds.samples.empty()) {
        throw Error(ErrorCode::EmptyForeground,
                    "no voxel exceeds the foreground threshold " + std::to_string(foreground_threshold));
    }
    return ds;
}

}  // namespace mgs
