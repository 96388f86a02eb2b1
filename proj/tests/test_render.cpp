#include <random>

#include "doctest.h"
#include "mgs/parallel.hpp"
#include "mgs/render.hpp"
#include "support/oracles.hpp"

using namespace mgs;

namespace {

std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t n, double extent) {
    std::uniform_real_distribution<double> u(-extent, extent);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    return pts;
}

}  // namespace

TEST_CASE("full-radius rendering matches the dense sum") {
    std::mt19937_64 rng(5);
    const GaussianField f = oracle::random_field(rng, 300, 0.9);
    const PartitionGrid grid = build_partition(f, 6, 6);
    const FieldEvaluator eval(f, grid);
    const auto pts = random_points(rng, 500, 1.0);
    std::vector<double> got(pts.size());
    std::vector<std::uint32_t> counts(pts.size());
    eval.evaluate(pts, got, {}, counts);
    for (std::size_t b = 0; b < pts.size(); ++b) {
        const double ref = oracle::dense_intensity(f, pts[b]);
        CHECK(std::abs(got[b] - ref) < 1e-10);
        CHECK(std::abs(eval.evaluate_dense(pts[b]) - ref) < 1e-10);
        CHECK(counts[b] == 300);
    }
}

TEST_CASE("local rendering sums exactly the queried primitives") {
    std::mt19937_64 rng(6);
    const GaussianField f = oracle::random_field(rng, 400, 1.0);
    const PartitionGrid grid = build_partition(f, 8, 1);
    const FieldEvaluator eval(f, grid);
    const auto pts = random_points(rng, 200, 1.0);
    std::vector<double> got(pts.size());
    std::vector<std::uint32_t> counts(pts.size());
    eval.evaluate(pts, got, {}, counts);
    for (std::size_t b = 0; b < pts.size(); ++b) {
        const auto members = oracle::brute_force_members(f, pts[b], 8, 1);
        double ref = 0.0;
        for (auto i : members) {
            const Vec3 d = pts[b] - f.position(i);
            ref += oracle::sigmoid(f.intensity_logits[i]) *
                   std::exp(-0.5 * d.dot(oracle::precision(f.quaternion(i), f.log_scale(i)) * d));
        }
        CHECK(counts[b] == members.size());
        CHECK(std::abs(got[b] - ref) < 1e-12);
    }
}

TEST_CASE("spatial gradient matches finite differences") {
    std::mt19937_64 rng(8);
    const GaussianField f = oracle::random_field(rng, 20, 0.5);
    const PartitionGrid grid = build_partition(f, 2, 2);
    const FieldEvaluator eval(f, grid);
    const auto pts = random_points(rng, 20, 0.6);
    std::vector<double> val(pts.size());
    std::vector<Vec3> grad(pts.size());
    eval.evaluate(pts, val, grad);
    for (std::size_t b = 0; b < pts.size(); ++b) {
        for (int a = 0; a < 3; ++a) {
            Vec3 up = pts[b], down = pts[b];
            up[a] += 1e-5;
            down[a] -= 1e-5;
            const double numeric = (oracle::dense_intensity(f, up) - oracle::dense_intensity(f, down)) / 2e-5;
            CHECK(oracle::rel_error(grad[b][a], numeric) < 1e-6);
        }
    }
}

TEST_CASE("parameter and transform gradients match finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const oracle::GradCheck r = oracle::check_render_gradients(seed);
        CHECK(r.checked == 5 * 11 + 2 * 7);
        CHECK(r.max_rel < 1e-4);
    }
}

TEST_CASE("gradient accumulation does not depend on the worker count") {
    std::mt19937_64 rng(9);
    const GaussianField f = oracle::random_field(rng, 2000, 1.0);
    const PartitionGrid grid = build_partition(f, 12, 2);
    const FieldEvaluator eval(f, grid);
    const auto pts = random_points(rng, 3000, 1.0);
    std::vector<double> up(pts.size());
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : up) v = u(rng);
    const int saved = thread_count();
    RenderGradients one, many;
    one.resize(f.size(), 0);
    many.resize(f.size(), 0);
    set_thread_count(1);
    eval.accumulate_gradients(pts, up, one);
    set_thread_count(5);
    eval.accumulate_gradients(pts, up, many);
    set_thread_count(saved);
    CHECK(one.d_positions == many.d_positions);
    CHECK(one.d_quaternions == many.d_quaternions);
    CHECK(one.d_log_scales == many.d_log_scales);
    CHECK(one.d_intensity_logits == many.d_intensity_logits);
}

TEST_CASE("evaluator rejects a grid built for another field") {
    std::mt19937_64 rng(10);
    const GaussianField f = oracle::random_field(rng, 10);
    const GaussianField g = oracle::random_field(rng, 11);
    const PartitionGrid grid = build_partition(g, 2, 1);
    CHECK_THROWS_AS(FieldEvaluator(f, grid), Error);
}

TEST_CASE("sample_volume clamps and refuses oversized requests") {
    std::vector<Primitive> prims(1);
    prims[0].intensity_logit = 8.0;
    prims[0].log_scale = Vec3::Constant(-1.0);
    const GaussianField f = GaussianField::from_primitives(prims);
    const PartitionGrid grid = build_partition(f, 2, 2);
    const SamplingBox box = SamplingBox::covering(Vec3::Constant(-1), Vec3::Constant(1), {8, 8, 8});
    const Volume v = sample_volume(f, grid, nullptr, {8, 8, 8}, box);
    for (float x : v.data) CHECK((x >= 0.0f && x <= 1.0f));
    try {
        sample_volume(f, grid, nullptr, {100, 100, 100}, box, 1000);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OutOfMemory);
    }
}
