#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "mgs/checkpoint.hpp"
#include "mgs/pipeline.hpp"
#include "support/fixtures.hpp"

using namespace mgs;

TEST_CASE("fusion of thin motion-free stacks recovers the ground truth") {
    RunConfig c = fixture::tiny_config();
    c.sim.slice_thickness = 1.0;
    c.sim.motion_sigma = 0.0;
    c.sim.noise_sigma = 0.0;
    const Simulation sim = simulate(c);
    const Volume fused = trilinear_fusion(sim.stacks, sim.gt);
    REQUIRE(fused.dims == sim.gt.dims);
    for (std::size_t i = 0; i < fused.data.size(); ++i) CHECK(fused.data[i] == doctest::Approx(sim.gt.data[i]).epsilon(1e-5));
}

TEST_CASE("simulated stacks are independent of the stack list") {
    RunConfig c = fixture::tiny_config();
    const Simulation three = simulate(c);
    c.sim.stacks.pop_back();
    const Simulation two = simulate(c);
    REQUIRE(two.stacks.size() == 2);
    CHECK(two.stacks[1].slices[3].data == three.stacks[1].slices[3].data);
    CHECK(two.gt.data == three.gt.data);
}

TEST_CASE("output grids") {
    const auto& d = fixture::tiny_data();
    const Volume same = output_grid_like(d.sim.gt, 0);
    CHECK(same.dims == d.sim.gt.dims);
    CHECK(same.origin == d.sim.gt.origin);
    const Volume coarse = output_grid_like(d.sim.gt, 12);
    CHECK(coarse.dims == Index3{12, 12, 12});
    CHECK(coarse.spacing[0] == doctest::Approx(2.0));
    CHECK(coarse.origin[0] == doctest::Approx(d.sim.gt.origin[0] + 0.5));
}

TEST_CASE("reconstruction renders in stack units and resumes exactly") {
    const auto& d = fixture::tiny_data();
    const RunConfig c = fixture::tiny_config();
    const Reconstruction full = reconstruct(c, d.data, d.sim.gt);
    CHECK(full.state.iteration == 10);
    CHECK(full.log.size() == 10);
    CHECK(full.volume.dims == d.sim.gt.dims);
    float hi = 0.0f;
    for (float v : full.volume.data) hi = std::max(hi, v);
    CHECK(hi <= d.data.normalization.intensity_scale + 1e-6);
    CHECK(hi > 0.1f);

    ReconOptions half;
    half.until = 5;
    const Reconstruction first = reconstruct(c, d.data, d.sim.gt, half);
    const auto path = std::filesystem::temp_directory_path() / "mgs_pipeline_resume.mgss";
    save_checkpoint(path, first.state);
    ReconOptions rest;
    rest.resume = path;
    const Reconstruction second = reconstruct(c, d.data, d.sim.gt, rest);
    CHECK(second.volume.data == full.volume.data);
    CHECK(serialize_checkpoint(second.state) == serialize_checkpoint(full.state));
}

TEST_CASE("loss records") {
    LossReport r;
    r.iteration = 12;
    r.resolution = 24;
    r.nrf_active = true;
    r.total = 0.5;
    const std::string s = format_loss(r);
    CHECK(s.rfind("iter=12 resolution=24 nrf=1 total=0.5", 0) == 0);
    CHECK(s.find("aniso=") != std::string::npos);
}

TEST_CASE("experiment variants toggle one component each") {
    const RunConfig base = desk_config();
    const auto v = ablation_variants(base, true);
    REQUIRE(v.size() == 6);
    CHECK(v[0].label == "full");
    CHECK(v[0].config == base);
    CHECK(v[1].config.train.lambda_ssim == 0.0);
    CHECK(v[2].config.train.lambda_ssim == 0.0);
    CHECK(v[2].config.train.resolution_schedule.size() == 1);
    CHECK(v[2].config.train.final_resolution() == base.train.final_resolution());
    CHECK(!v[3].config.train.use_nrf);
    CHECK(v[4].config.train.lambda_aniso == 0.0);
    CHECK(v[5].config.train.resolution_schedule.size() == 1);
    CHECK(v[5].config.train.lambda_ssim == base.train.lambda_ssim);

    const auto radii = radius_variants(base);
    REQUIRE(radii.size() == 5);
    for (std::size_t i = 0; i < radii.size(); ++i) CHECK(radii[i].config.train.block_radius == int(3 + i));
    const auto res = resolution_variants(base);
    CHECK(res.size() == 4);
    CHECK(res[3].config.train.resolution_schedule == std::vector<ScheduleEntry>{{0, 48}});
}

TEST_CASE("render speed benchmark agrees with the dense sum") {
    BenchConfig b;
    b.perf_lattice = 12;
    b.perf_queries = 2000;
    b.perf_dense_queries = 100;
    const PerfResult p = run_perf_bench(b, 2, 1);
    CHECK(p.primitives == 1728);
    CHECK(p.queries == 2000);
    CHECK(p.max_abs_difference < 1e-2);
    CHECK(run_perf_bench(b, 12, 1).max_abs_difference < 1e-10);
    CHECK(p.dense_seconds_estimate == doctest::Approx(p.dense_sample_seconds * 20.0));
    CHECK(format_perf(p).find("speedup=") != std::string::npos);
}
