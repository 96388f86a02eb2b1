#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "doctest.h"
#include "mgs/core.hpp"
#include "support/oracles.hpp"

using namespace mgs;

TEST_CASE("sigmoid and logit invert each other") {
    for (double x : {-6.0, -1.0, 0.0, 0.3, 4.0}) CHECK(logit(sigmoid(x)) == doctest::Approx(x).epsilon(1e-9));
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(std::isfinite(logit(0.0)));
    CHECK(std::isfinite(logit(1.0)));
}

TEST_CASE("lattice nodes include the corners") {
    CHECK(lattice_node(0, 16) == -1.0);
    CHECK(lattice_node(15, 16) == 1.0);
    CHECK(lattice_spacing(16) == doctest::Approx(2.0 / 15.0));
    const GaussianField f = GaussianField::uniform_lattice({3, 4, 5});
    CHECK(f.size() == 60);
    CHECK(f.lattice_index[1] == Index3{1, 0, 0});
    CHECK(f.position(59).isApprox(Vec3(1, 1, 1)));
    CHECK(std::exp(f.log_scale(0)[0]) == doctest::Approx(0.5));
    CHECK_NOTHROW(f.validate());
}

TEST_CASE("validate rejects inconsistent arrays") {
    GaussianField f = GaussianField::uniform_lattice({2, 2, 2});
    f.quaternions.pop_back();
    CHECK_THROWS_AS(f.validate(), Error);
}

TEST_CASE("rotation matches Eigen for unnormalized quaternions") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n;
    for (int t = 0; t < 50; ++t) {
        const Quat4 q(n(rng), n(rng), n(rng), n(rng));
        const Mat3 ref = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized().toRotationMatrix();
        CHECK((quat_to_rotation(q) - ref).norm() < 1e-12);
        const Quat4 back = quat_from_rotation(ref);
        const Quat4 unit = q.normalized();
        CHECK(std::min((back - unit).norm(), (back + unit).norm()) < 1e-10);
    }
}

TEST_CASE("degenerate quaternion is rejected") {
    try {
        quat_to_rotation(Quat4::Zero());
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateQuaternion);
        CHECK(exit_code_for(e.code()) == 3);
    }
}

TEST_CASE("rotation_backward matches finite differences") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    const Quat4 q(0.9, 0.2, -0.4, 0.3);
    Mat3 g;
    for (int i = 0; i < 9; ++i) g(i / 3, i % 3) = n(rng);
    const Quat4 analytic = rotation_backward(q, g);
    for (int c = 0; c < 4; ++c) {
        Quat4 up = q, down = q;
        up[c] += 1e-6;
        down[c] -= 1e-6;
        const double numeric =
            ((quat_to_rotation(up).cwiseProduct(g)).sum() - (quat_to_rotation(down).cwiseProduct(g)).sum()) / 2e-6;
        CHECK(oracle::rel_error(analytic[c], numeric) < 1e-7);
    }
}

TEST_CASE("precision agrees with an independent inverse") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 30; ++t) {
        const Quat4 q(u(rng) + 1.5, u(rng), u(rng), u(rng));
        const Vec3 s(u(rng), u(rng), u(rng));
        const Covariance c = assemble_precision(q, s);
        const Mat3 ref = oracle::precision(q, s);
        CHECK((c.precision - ref).norm() / ref.norm() < 1e-12);
        CHECK((c.covariance() * c.precision - Mat3::Identity()).norm() < 1e-10);
    }
}

TEST_CASE("scale overflow is reported") {
    CHECK_THROWS_AS(assemble_precision(Quat4(1, 0, 0, 0), Vec3(0, 0, 21)), Error);
    CHECK_NOTHROW(assemble_precision(Quat4(1, 0, 0, 0), Vec3(0, 0, 20)));
}

TEST_CASE("rigid compose and inverse") {
    RigidTransform a, b;
    a.rotation_quat = Quat4(0.8, 0.1, 0.3, -0.2);
    a.translation = Vec3(0.1, -0.2, 0.3);
    b.rotation_quat = Quat4(0.5, -0.5, 0.1, 0.2);
    b.translation = Vec3(-0.3, 0.0, 0.05);
    const Vec3 x(0.2, 0.7, -0.4);
    CHECK((apply_rigid(compose(a, b), x) - apply_rigid(a, apply_rigid(b, x))).norm() < 1e-14);
    CHECK((apply_rigid(inverse(a), apply_rigid(a, x)) - x).norm() < 1e-14);
}

TEST_CASE("error messages carry the code name") {
    const Error e(ErrorCode::UnknownKey, "x");
    CHECK(std::string(e.what()) == "UnknownKey: x");
    CHECK(exit_code_for(ErrorCode::Usage) == 1);
    CHECK(exit_code_for(ErrorCode::BadMagic) == 2);
    CHECK(exit_code_for(ErrorCode::NonFiniteLoss) == 3);
}
