#include <doctest.h>

#include "driftwt/kernels.hpp"
#include "driftwt/numerics.hpp"
#include "driftwt/objectives.hpp"

using namespace driftwt;

TEST_SUITE("numerics") {
    TEST_CASE("gemv identity and zero") {
        CHECK(gemv(Mat::identity(3), Vec{1, 2, 3}) == Vec{1, 2, 3});
        CHECK(gemv(Mat(2, 2, 0.0), Vec{5, 7}) == Vec{0, 0});
    }

    TEST_CASE("gemv hand-computed 2x2") {
        Mat m(2, 2);
        m(0, 0) = 1; m(0, 1) = 2; m(1, 0) = 3; m(1, 1) = 4;
        CHECK(gemv(m, Vec{1, 1}) == Vec{3, 7});
    }

    TEST_CASE("gemv dimension mismatch") {
        CHECK_THROWS_AS(gemv(Mat(2, 3, 1.0), Vec{1, 2}), contract_error);
    }

    TEST_CASE("gemv linearity") {
        Rng rng(7);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t r = 1 + rng.below(6), c = 1 + rng.below(6);
            Mat m(r, c);
            for (auto& v : m.data) v = rng.normal();
            Vec u(c), w(c);
            for (auto& v : u) v = rng.normal();
            for (auto& v : w) v = rng.normal();
            const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
            const Vec lhs = gemv(m, add(scaled(u, a), scaled(w, b)));
            const Vec rhs = add(scaled(gemv(m, u), a), scaled(gemv(m, w), b));
            for (std::size_t i = 0; i < r; ++i)
                CHECK(std::abs(lhs[i] - rhs[i]) <= 1e-10 * (1.0 + std::abs(rhs[i])));
        }
    }

    TEST_CASE("rng matches the published SplitMix64 stream") {
        Rng r(0);
        CHECK(r.next_u64() == 0xE220A8397B1DCDAFull);
        CHECK(r.next_u64() == 0x6E789E6AA1B965F4ull);
        CHECK(r.next_u64() == 0x06C45D188009454Full);
    }

    TEST_CASE("rng equal seeds give bit-identical first 1000 draws") {
        Rng a(987654321), b(987654321);
        for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    }

    TEST_CASE("rng uniform range and below bounds") {
        Rng r(5);
        for (int i = 0; i < 1000; ++i) {
            const double u = r.uniform();
            CHECK(u >= 0.0);
            CHECK(u < 1.0);
            CHECK(r.below(7) < 7);
        }
    }

    TEST_CASE("check_gradient quadratic is exact to roundoff") {
        auto f = [](const Vec& x) { return dot(x, x); };
        auto g = [](const Vec& x) { return scaled(x, 2.0); };
        CHECK(check_gradient(f, g, Vec{1, 2}, 1e-5) < 1e-8);
    }

    TEST_CASE("check_gradient linear") {
        auto f = [](const Vec& x) { return sum(x); };
        auto g = [](const Vec& x) { return Vec(x.size(), 1.0); };
        CHECK(check_gradient(f, g, Vec{0.3, -2.0, 5.0}, 1e-5) < 1e-10);
    }

    TEST_CASE("check_gradient on a random kmm objective") {
        Rng rng(11);
        std::vector<Vec> ztr, zv;
        for (int i = 0; i < 6; ++i) ztr.push_back(Vec{rng.normal(), rng.normal()});
        for (int i = 0; i < 4; ++i) zv.push_back(Vec{rng.normal(), rng.normal()});
        const Objective obj = kmm_build(RbfKernel{1.0}, ztr, zv, 0.1);
        Vec w(6);
        for (auto& v : w) v = rng.uniform(0.2, 2.0);
        CHECK(check_gradient(obj.value, obj.grad, w, 1e-5) < 1e-5);
    }

    TEST_CASE("check_gradient contracts") {
        auto f = [](const Vec& x) { return x[0]; };
        auto g = [](const Vec&) { return Vec{1.0}; };
        CHECK_THROWS_AS(check_gradient(f, g, Vec{0.0}, 0.0), contract_error);
        auto bad = [](const Vec& x) { return std::log(x[0]); };
        auto badg = [](const Vec& x) { return Vec{1.0 / x[0]}; };
        CHECK_THROWS_AS(check_gradient(bad, badg, Vec{1e-9}, 1.0), evaluation_error);
    }

    TEST_CASE("largest eigenvalue by power iteration") {
        Mat m(2, 2, 0.0);
        m(0, 0) = 2.0;
        m(1, 1) = 1.0;
        const double l =
            largest_eigenvalue_sym([&](const Vec& v) { return gemv(m, v); }, 2, 60);
        CHECK(l == doctest::Approx(2.0).epsilon(1e-9));
    }
}
