#include <cmath>

#include "doctest.h"
#include "mgs/simdata.hpp"

using namespace mgs;

TEST_CASE("slab profile has its half maximum at the slab edge") {
    const std::vector<double> off{-2.0, 0.0, 2.0, 1.0};
    const auto w = slab_weights(off, 4.0);
    CHECK(w[0] / w[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(w[2] == w[0]);
    CHECK(w[0] + w[1] + w[2] + w[3] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("slice count") {
    CHECK(slice_count(64, 4, 0) == 16);
    CHECK(slice_count(64, 4, 1) == 13);
    CHECK(slice_count(3, 4, 0) == 0);
}

TEST_CASE("phantom is deterministic and in unit range") {
    const Volume a = make_phantom(PhantomKind::NestedEllipsoids, {32, 32, 32}, 5);
    const Volume b = make_phantom(PhantomKind::NestedEllipsoids, {32, 32, 32}, 5);
    const Volume c = make_phantom(PhantomKind::NestedEllipsoids, {32, 32, 32}, 6);
    CHECK(a.data == b.data);
    CHECK(a.data != c.data);
    float lo = 1, hi = 0;
    for (float v : a.data) lo = std::min(lo, v), hi = std::max(hi, v);
    CHECK(lo == 0.0f);
    CHECK(hi <= 1.0f);
    CHECK(a.at(0, 0, 0) == 0.0f);
    CHECK(a.at(16, 16, 16) > 0.0f);
    CHECK_THROWS_AS(make_phantom(PhantomKind::CheckerShell, {8, 32, 32}, 0), Error);
}

TEST_CASE("thin motion-free slabs sample the ground truth planes") {
    const Volume gt = make_phantom(PhantomKind::NestedEllipsoids, {20, 18, 16}, 1);
    AcquisitionParams p;
    p.orientation = Orientation::Coronal;
    p.slice_thickness = 1.0;
    const SliceStack s = acquire_stack(gt, p);
    REQUIRE(s.slices.size() == 18);
    CHECK(s.width() == 20);
    CHECK(s.height() == 16);
    for (int k = 0; k < 18; ++k)
        for (int v = 0; v < 16; ++v)
            for (int u = 0; u < 20; ++u) CHECK(s.slices[k].at(u, v) == doctest::Approx(gt.at(u, k, v)).epsilon(1e-6));
}

TEST_CASE("thick slabs average the covered planes with the slab profile") {
    const Volume gt = make_phantom(PhantomKind::CheckerShell, {16, 16, 16}, 2);
    AcquisitionParams p;
    p.slice_thickness = 4.0;
    const SliceStack s = acquire_stack(gt, p);
    REQUIRE(s.slices.size() == 4);
    // Slab 1 covers z in [3.5, 7.5): planes 4..7 at offsets -1.5, -0.5, 0.5, 1.5.
    const std::vector<double> off{-1.5, -0.5, 0.5, 1.5};
    const auto w = slab_weights(off, 4.0);
    const double expect = w[0] * gt.at(5, 9, 4) + w[1] * gt.at(5, 9, 5) + w[2] * gt.at(5, 9, 6) + w[3] * gt.at(5, 9, 7);
    CHECK(s.slices[1].at(5, 9) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("orientation axes") {
    CHECK(orientation_axes(Orientation::Axial) == std::array<int, 3>{0, 1, 2});
    CHECK(orientation_axes(Orientation::Coronal) == std::array<int, 3>{0, 2, 1});
    CHECK(orientation_axes(Orientation::Sagittal) == std::array<int, 3>{1, 2, 0});
    CHECK(orientation_from_string("sagittal") == Orientation::Sagittal);
    CHECK_THROWS_AS(orientation_from_string("oblique"), Error);
}

TEST_CASE("normalized transforms agree with world motion") {
    NormalizationRecord norm;
    norm.center_mm = Vec3(30, 31, 29);
    norm.scale = 0.03;
    RigidMotion m{quat_from_euler_deg(Vec3(3, -2, 5)), Vec3(0.5, -1.0, 0.7), Vec3(31.5, 31.5, 31.5)};
    const RigidTransform t = motion_to_normalized(m, norm, 4);
    CHECK(t.slice_id == 4);
    for (const Vec3 p : {Vec3(0, 0, 0), Vec3(60, 10, 33), Vec3(12, 50, 7)}) {
        const Vec3 lhs = norm.to_normalized(m.apply(p));
        const Vec3 rhs = apply_rigid(t, norm.to_normalized(p));
        CHECK((lhs - rhs).norm() < 1e-13);
    }
}

TEST_CASE("devoxelization normalizes coordinates and intensities") {
    const Volume gt = make_phantom(PhantomKind::NestedEllipsoids, {24, 24, 24}, 0);
    std::vector<SliceStack> stacks;
    for (auto o : {Orientation::Axial, Orientation::Sagittal}) {
        AcquisitionParams p;
        p.orientation = o;
        p.slice_thickness = 3.0;
        stacks.push_back(acquire_stack(gt, p));
    }
    const Dataset d = devoxelize(stacks, 0.02);
    CHECK(d.slices.size() == 16);
    CHECK(d.initial_transforms.size() == 16);
    double peak = 0.0;
    for (const auto& s : d.samples) {
        CHECK(s.intensity > 0.02);
        CHECK(s.intensity <= 1.0);
        CHECK(s.coord.cwiseAbs().maxCoeff() <= kNormalizedHalfExtent + 1e-12);
        peak = std::max(peak, s.intensity);
    }
    CHECK(peak == 1.0);
    CHECK_THROWS_AS(devoxelize(std::vector<SliceStack>{}, 0.02), Error);
}

TEST_CASE("stack validation catches thin slabs") {
    SliceStack s;
    s.slices.assign(2, Image2D(4, 4));
    s.in_plane_spacing = 2.0;
    s.slice_thickness = 1.0;
    CHECK_THROWS_AS(s.validate(), Error);
}
