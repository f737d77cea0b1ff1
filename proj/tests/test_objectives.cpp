#include <doctest.h>

#include "driftwt/objectives.hpp"
#include "driftwt/pgd.hpp"

using namespace driftwt;

namespace {

Vec random_feasible_mean_band(std::size_t n, double eps, Rng& rng) {
    Vec w(n);
    double tot = 0;
    for (auto& v : w) {
        v = std::abs(rng.normal());
        tot += v;
    }
    const double target = static_cast<double>(n) * rng.uniform(1.0 - eps, 1.0 + eps);
    for (auto& v : w) v *= target / tot;
    return w;
}

}  // namespace

TEST_SUITE("objectives") {
    TEST_CASE("kmm scalar instance") {
        // one train point equal to one validation point: K = [[1]], k = [1]
        const std::vector<Vec> z = {Vec{0.4}};
        const Objective obj = kmm_build(RbfKernel{1.0}, z, z, 0.3);
        CHECK(obj.value(Vec{1.0}) == doctest::Approx(-1.0).epsilon(1e-14));
        CHECK(obj.grad(Vec{1.0})[0] == doctest::Approx(0.0).epsilon(1e-14));
        PgdConfig pc;
        pc.to_convergence = true;
        pc.tol = 1e-12;
        pc.max_iter = 1000;
        const Vec w = run(obj, Vec{1.0}, pc).point;
        CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-9));
    }

    TEST_CASE("kmm gradient vanishes at all-ones when train equals val") {
        Rng rng(41);
        std::vector<Vec> z;
        for (int i = 0; i < 6; ++i) z.push_back(Vec{rng.normal(), rng.normal()});
        const Objective obj = kmm_build(RbfKernel{0.8}, z, z, 0.1);
        const Vec g = obj.grad(Vec(6, 1.0));
        for (double v : g) CHECK(std::abs(v) <= 1e-12);
    }

    TEST_CASE("kmm converged objective matches a large random feasible search") {
        Rng rng(43);
        std::vector<Vec> ztr, zv;
        for (int i = 0; i < 8; ++i) ztr.push_back(Vec{rng.normal()});
        for (int i = 0; i < 5; ++i) zv.push_back(Vec{0.5 + rng.normal()});
        const double eps = 0.2;
        const Objective obj = kmm_build(RbfKernel{1.0}, ztr, zv, eps);
        PgdConfig pc;
        pc.to_convergence = true;
        pc.tol = 1e-12;
        pc.max_iter = 100000;
        const double mine = obj.value(run(obj, Vec(8, 1.0), pc).point);
        double best = 1e300;
        for (int s = 0; s < 1000000; ++s)
            best = std::min(best, obj.value(random_feasible_mean_band(8, eps, rng)));
        CHECK(mine <= best + 1e-3);
    }

    TEST_CASE("kliep with one basis center is pinned by the constraint") {
        const std::vector<Vec> ztr = {Vec{0.0}, Vec{0.5}};
        const std::vector<Vec> zv = {Vec{0.2}};
        const BasisSet basis{zv};
        const Objective obj = kliep_build(basis, RbfKernel{1.0}, ztr, zv);
        const auto& a = std::get<NonnegWeightedSumOne>(obj.constraint).a;
        const Vec beta = project(obj.constraint, Vec{5.0});
        CHECK(beta[0] == doctest::Approx(1.0 / a[0]).epsilon(1e-10));
        // decreasing beta increases the objective
        CHECK(obj.grad(beta)[0] < 0.0);
    }

    TEST_CASE("kliep gradient matches finite differences in the interior") {
        Rng rng(47);
        std::vector<Vec> ztr, zv;
        for (int i = 0; i < 6; ++i) ztr.push_back(Vec{rng.normal()});
        for (int i = 0; i < 4; ++i) zv.push_back(Vec{rng.normal()});
        const Objective obj = kliep_build(BasisSet{zv}, RbfKernel{1.0}, ztr, zv);
        for (int pt = 0; pt < 5; ++pt) {
            Vec beta(4);
            for (auto& b : beta) b = rng.uniform(0.3, 1.5);
            CHECK(check_gradient(obj.value, obj.grad, beta, 1e-6) < 1e-5);
        }
    }

    TEST_CASE("kliep underflow returns the infinity sentinel") {
        const std::vector<Vec> ztr = {Vec{0.0}, Vec{10.0}};
        const std::vector<Vec> zv = {Vec{0.0}, Vec{10.0}};
        const Objective obj = kliep_build(BasisSet{zv}, RbfKernel{0.05}, ztr, zv);
        CHECK(obj.value(Vec{0.0, 0.0}) == std::numeric_limits<double>::infinity());
        // mass far from the first validation point: its model value underflows
        CHECK(obj.value(Vec{0.0, 1.0}) == std::numeric_limits<double>::infinity());
        CHECK(obj.value(Vec{1.0, 1.0}) < std::numeric_limits<double>::infinity());
    }

    TEST_CASE("kliep dominated by the log of the near-center coefficient") {
        // one validation point exactly at a center, the other basis direction
        // far away with a small width
        const std::vector<Vec> ztr = {Vec{0.0}, Vec{0.1}};
        const std::vector<Vec> zv = {Vec{0.0}};
        const Objective obj = kliep_build(BasisSet{zv}, RbfKernel{0.05}, ztr, zv);
        const Vec beta{0.25};
        CHECK(obj.value(beta) == doctest::Approx(-std::log(0.25)).epsilon(1e-6));
    }

    TEST_CASE("lsif moments match a brute-force construction") {
        Rng rng(53);
        std::vector<Vec> ztr, zv;
        for (int i = 0; i < 7; ++i) ztr.push_back(Vec{rng.normal(), rng.normal()});
        for (int i = 0; i < 4; ++i) zv.push_back(Vec{rng.normal(), rng.normal()});
        const RbfKernel k{0.9};
        const BasisSet basis{zv};
        const double lambda = 0.01;
        const Objective obj = lsif_build(basis, k, ztr, zv, lambda);
        Vec beta{0.2, 0.9, 0.4, 0.1};
        // direct double loop
        Mat H(4, 4, 0.0);
        Vec h(4, 0.0);
        for (const Vec& z : ztr) {
            const Vec f = features(basis, k, z);
            for (int l = 0; l < 4; ++l)
                for (int m = 0; m < 4; ++m) H(l, m) += f[l] * f[m] / 7.0;
        }
        for (const Vec& z : zv) {
            const Vec f = features(basis, k, z);
            for (int l = 0; l < 4; ++l) h[l] += f[l] / 4.0;
        }
        const double expect = 0.5 * dot(beta, gemv(H, beta)) - dot(h, beta) + lambda * sum(beta);
        CHECK(obj.value(beta) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(check_gradient(obj.value, obj.grad, beta, 1e-6) < 1e-6);
    }

    TEST_CASE("lsif with a large regularizer is minimized at zero") {
        Rng rng(59);
        std::vector<Vec> ztr, zv;
        for (int i = 0; i < 6; ++i) ztr.push_back(Vec{rng.normal()});
        for (int i = 0; i < 3; ++i) zv.push_back(Vec{rng.normal()});
        const Objective obj = lsif_build(BasisSet{zv}, RbfKernel{1.0}, ztr, zv, 2.0);
        PgdConfig pc;
        pc.to_convergence = true;
        pc.tol = 1e-14;
        pc.max_iter = 100000;
        const Vec beta = run(obj, Vec(3, 0.5), pc).point;
        for (double b : beta) CHECK(std::abs(b) <= 1e-6);
        CHECK(obj.value(beta) == doctest::Approx(0.0).epsilon(1e-9));
    }

    TEST_CASE("lsif random instance beats a random search") {
        Rng rng(61);
        std::vector<Vec> ztr, zv;
        for (int i = 0; i < 9; ++i) ztr.push_back(Vec{rng.normal()});
        for (int i = 0; i < 4; ++i) zv.push_back(Vec{0.3 + rng.normal()});
        const Objective obj = lsif_build(BasisSet{zv}, RbfKernel{1.0}, ztr, zv, 1e-4);
        PgdConfig pc;
        pc.to_convergence = true;
        pc.tol = 1e-13;
        pc.max_iter = 100000;
        const double mine = obj.value(run(obj, Vec(4, 0.5), pc).point);
        double best = 1e300;
        for (int s = 0; s < 1000000; ++s) {
            Vec beta(4);
            for (auto& b : beta) b = std::abs(rng.normal()) * 2.0;
            best = std::min(best, obj.value(beta));
        }
        CHECK(mine <= best + 1e-4);
    }

    TEST_CASE("weights_from_params basics and brute force") {
        Rng rng(67);
        std::vector<Vec> ztr, zv;
        for (int i = 0; i < 5; ++i) ztr.push_back(Vec{rng.normal()});
        for (int i = 0; i < 3; ++i) zv.push_back(Vec{rng.normal()});
        const RbfKernel k{1.0};
        const Objective obj = kliep_build(BasisSet{zv}, k, ztr, zv);

        CHECK(weights_from_params(obj, Vec(3, 0.0), ztr) == Vec(5, 0.0));

        Vec beta{0.4, 1.1, 0.2};
        const Vec w = weights_from_params(obj, beta, ztr);
        for (std::size_t i = 0; i < 5; ++i) {
            double expect = 0;
            for (std::size_t l = 0; l < 3; ++l) expect += beta[l] * rbf(k, ztr[i], zv[l]);
            CHECK(w[i] == doctest::Approx(expect).epsilon(1e-14));
            CHECK(w[i] >= 0.0);
        }

        // wide-kernel limit with a single basis function: w tends to beta
        const std::vector<Vec> one_center = {Vec{0.0}};
        const Objective wide = kliep_build(BasisSet{one_center}, RbfKernel{1e9}, ztr, one_center);
        const Vec w2 = weights_from_params(wide, Vec{2.0}, ztr);
        for (double v : w2) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
    }

    TEST_CASE("w1 weight gradient") {
        CHECK(w1_weight_gradient(Vec(4, 0.0), 4) == Vec(4, 0.0));
        const Vec g = w1_weight_gradient(Vec{3.0, 3.0}, 2);
        CHECK(g == Vec{-1.5, -1.5});
        const Vec g3 = w1_weight_gradient(Vec{1.0, 2.0, 3.0}, 3);
        CHECK(g3[0] == doctest::Approx(-1.0 / 3.0));
        CHECK(g3[1] == doctest::Approx(-2.0 / 3.0));
        CHECK(g3[2] == doctest::Approx(-1.0));
    }

    TEST_CASE("every analytic gradient passes the checker at random feasible points") {
        Rng rng(71);
        std::vector<Vec> ztr, zv;
        for (int i = 0; i < 7; ++i) ztr.push_back(Vec{rng.normal(), rng.normal()});
        for (int i = 0; i < 5; ++i) zv.push_back(Vec{rng.normal(), rng.normal()});
        const RbfKernel k{1.1};
        const Objective kmm = kmm_build(k, ztr, zv, 0.2);
        const Objective kliep = kliep_build(BasisSet{zv}, k, ztr, zv);
        const Objective lsif = lsif_build(BasisSet{zv}, k, ztr, zv, 1e-3);
        for (int pt = 0; pt < 20; ++pt) {
            const Vec w = random_feasible_mean_band(7, 0.2, rng);
            CHECK(check_gradient(kmm.value, kmm.grad, w, 1e-5) < 1e-4);
            Vec beta(5);
            for (auto& b : beta) b = rng.uniform(0.2, 1.2);  // strict interior
            CHECK(check_gradient(kliep.value, kliep.grad, beta, 1e-6) < 1e-4);
            CHECK(check_gradient(lsif.value, lsif.grad, beta, 1e-5) < 1e-4);
        }
    }

    TEST_CASE("kmm gradient is the expanded squared-MMD gradient up to 1/n_tr^2") {
        Rng rng(73);
        std::vector<Vec> ztr, zv;
        for (int i = 0; i < 5; ++i) ztr.push_back(Vec{rng.normal()});
        for (int i = 0; i < 3; ++i) zv.push_back(Vec{0.2 + rng.normal()});
        const RbfKernel k{0.9};
        const Objective obj = kmm_build(k, ztr, zv, 0.2);
        const double n_tr = 5.0, n_v = 3.0;
        // expanded sample form of the squared MMD including the constant term
        auto mmd_sq = [&](const Vec& w) {
            double tt = 0, tv = 0, vv = 0;
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j) tt += w[i] * w[j] * rbf(k, ztr[i], ztr[j]);
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 3; ++j) tv += w[i] * rbf(k, ztr[i], zv[j]);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) vv += rbf(k, zv[i], zv[j]);
            return tt / (n_tr * n_tr) - 2.0 * tv / (n_tr * n_v) + vv / (n_v * n_v);
        };
        const Vec w = random_feasible_mean_band(5, 0.2, rng);
        const Vec g = obj.grad(w);
        Vec p = w;
        for (std::size_t i = 0; i < 5; ++i) {
            const double h = 1e-6;
            p[i] = w[i] + h;
            const double fp = mmd_sq(p);
            p[i] = w[i] - h;
            const double fm = mmd_sq(p);
            p[i] = w[i];
            const double fd = (fp - fm) / (2 * h);
            CHECK(fd == doctest::Approx(g[i] / (n_tr * n_tr)).epsilon(1e-4));
        }
    }

    TEST_CASE("lsif in the wide-kernel limit makes near-uniform weights") {
        Rng rng(79);
        std::vector<Vec> z;
        for (int i = 0; i < 6; ++i) z.push_back(Vec{rng.normal()});
        const Objective obj = lsif_build(BasisSet{z}, RbfKernel{1e6}, z, z, 0.0);
        PgdConfig pc;
        pc.to_convergence = true;
        pc.tol = 1e-13;
        pc.max_iter = 200000;
        const Vec beta = run(obj, project(obj.constraint, Vec(6, 1.0 / 6.0)), pc).point;
        const Vec w = weights_from_params(obj, beta, z);
        CHECK(std::abs(mean(w) - 1.0) < 0.1);
    }
}
