#include <doctest.h>

#include "driftwt/kernels.hpp"
#include "driftwt/pgd.hpp"

using namespace driftwt;

namespace {

// Synthetic quadratic J(w) = w^T A w - 2 b^T w over a mean band.
Objective synthetic_quadratic(Mat A, Vec b, double eps) {
    auto Ap = std::make_shared<Mat>(std::move(A));
    auto bp = std::make_shared<Vec>(std::move(b));
    Objective obj;
    obj.kind = ObjectiveKind::kmm;
    obj.dim = bp->size();
    obj.constraint = NonnegMeanBand{eps};
    obj.value = [Ap, bp](const Vec& w) { return dot(w, gemv(*Ap, w)) - 2.0 * dot(*bp, w); };
    obj.grad = [Ap, bp](const Vec& w) {
        Vec g = gemv(*Ap, w);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * g[i] - 2.0 * (*bp)[i];
        return g;
    };
    obj.hess_vec = [Ap](const Vec& v) { return scaled(gemv(*Ap, v), 2.0); };
    return obj;
}

}  // namespace

TEST_SUITE("pgd") {
    TEST_CASE("a stationary point stays fixed") {
        Objective obj;
        obj.kind = ObjectiveKind::kmm;
        obj.dim = 3;
        obj.constraint = NonnegOrthant{};
        obj.value = [](const Vec&) { return 1.0; };
        obj.grad = [](const Vec& w) { return Vec(w.size(), 0.0); };
        PgdConfig pc;
        pc.steps = 7;
        pc.eta = 0.5;
        const PgdResult res = run(obj, Vec{1, 2, 3}, pc);
        CHECK(res.point == Vec{1, 2, 3});
        CHECK(res.iterations == 7);
    }

    TEST_CASE("1-D band-constrained quadratic lands on the interval endpoint") {
        // J(w) = w^2 - 4w, feasible interval [0.5, 1.5]: minimizer w = 1.5 with
        // J = -3.75 (grid-verified).
        const Objective obj = synthetic_quadratic(Mat::identity(1), Vec{2.0}, 0.5);
        PgdConfig pc;
        pc.to_convergence = true;
        pc.tol = 1e-14;
        pc.max_iter = 10000;
        const PgdResult res = run(obj, Vec{1.0}, pc);
        CHECK(res.point[0] == doctest::Approx(1.5).epsilon(1e-10));
        CHECK(obj.value(res.point) == doctest::Approx(-3.75).epsilon(1e-10));
        double best = 1e300;
        for (double w = 0.5; w <= 1.5; w += 1e-6) best = std::min(best, w * w - 4 * w);
        CHECK(obj.value(res.point) <= best + 1e-9);
    }

    TEST_CASE("lsif instance with a numerically diagonal moment matrix") {
        // one train point per far-apart center: H = I/b up to 1e-20 cross
        // terms, so the converged solution is b * h.
        std::vector<Vec> centers = {Vec{0.0}, Vec{30.0}, Vec{60.0}};
        const std::vector<Vec> zv = centers;
        const std::vector<Vec> ztr = centers;
        const RbfKernel k{2.0};
        const Objective obj = lsif_build(BasisSet{zv}, k, ztr, zv, 0.0);
        PgdConfig pc;
        pc.to_convergence = true;
        pc.tol = 1e-15;
        pc.max_iter = 200000;
        const Vec beta = run(obj, Vec(3, 0.0), pc).point;
        const Vec h = mean_features(BasisSet{zv}, k, zv);
        for (std::size_t l = 0; l < 3; ++l)
            CHECK(beta[l] == doctest::Approx(3.0 * std::max(h[l], 0.0)).epsilon(1e-6));
    }

    TEST_CASE("fixed-step mode performs exactly T accepted steps") {
        const Objective obj = synthetic_quadratic(Mat::identity(4), Vec{1, 2, 3, 4}, 0.3);
        PgdConfig pc;
        pc.steps = 5;
        const PgdResult res = run(obj, Vec(4, 1.0), pc);
        CHECK(res.iterations == 5);
        CHECK(res.objective_trajectory.size() == 6);  // initial value plus one per step
        CHECK(res.step_seconds.size() == 5);
    }

    TEST_CASE("permanently infinite objectives exhaust the halvings") {
        Objective obj;
        obj.kind = ObjectiveKind::kliep;
        obj.dim = 2;
        obj.constraint = NonnegOrthant{};
        long long calls = 0;
        obj.value = [&calls](const Vec& w) {
            ++calls;
            return (w == Vec{1.0, 1.0}) ? 0.0 : std::numeric_limits<double>::infinity();
        };
        obj.grad = [](const Vec&) { return Vec{1.0, 1.0}; };
        PgdConfig pc;
        pc.steps = 1;
        pc.eta = 1.0;
        try {
            run(obj, Vec{1.0, 1.0}, pc);
            FAIL("expected step_failure");
        } catch (const step_failure& e) {
            CHECK(e.last_point == Vec{1.0, 1.0});
        }
    }

    TEST_CASE("an oversized step on a log objective is halved until finite") {
        // the first candidate lands where the objective is +inf and must be
        // retried with smaller steps
        Objective obj;
        obj.kind = ObjectiveKind::kliep;
        obj.dim = 1;
        obj.constraint = NonnegOrthant{};
        obj.value = [](const Vec& w) {
            return w[0] < 0.5 ? std::numeric_limits<double>::infinity() : -std::log(w[0]);
        };
        obj.grad = [](const Vec& w) { return Vec{-1.0 / w[0]}; };
        PgdConfig pc;
        pc.steps = 1;
        pc.eta = 1000.0;  // unchecked this would jump far past the barrier
        const PgdResult res = run(obj, Vec{1.0}, pc);
        CHECK(res.point[0] >= 0.5);
        CHECK(std::isfinite(obj.value(res.point)));
    }

    TEST_CASE("iterates stay feasible and the quadratic trajectory is monotone at 1/L") {
        Rng rng(83);
        for (int inst = 0; inst < 10; ++inst) {
            std::vector<Vec> ztr, zv;
            const std::size_t n = 4 + rng.below(5);
            for (std::size_t i = 0; i < n; ++i) ztr.push_back(Vec{rng.normal()});
            for (int j = 0; j < 4; ++j) zv.push_back(Vec{0.3 + rng.normal()});
            const Objective obj = kmm_build(RbfKernel{1.0}, ztr, zv, 0.2);
            PgdConfig pc;
            pc.to_convergence = true;
            pc.tol = 1e-12;
            pc.max_iter = 3000;
            const PgdResult res = run(obj, Vec(n, 1.0), pc);
            CHECK(is_feasible(obj.constraint, res.point, 1e-8));
            for (std::size_t i = 1; i < res.objective_trajectory.size(); ++i)
                CHECK(res.objective_trajectory[i] <=
                      res.objective_trajectory[i - 1] + 1e-10);
        }
    }

    TEST_CASE("one warm-started step never increases the objective at 1/L") {
        Rng rng(89);
        for (int inst = 0; inst < 10; ++inst) {
            std::vector<Vec> ztr, zv;
            for (int i = 0; i < 6; ++i) ztr.push_back(Vec{rng.normal()});
            for (int j = 0; j < 4; ++j) zv.push_back(Vec{0.5 + rng.normal()});
            const Objective obj = kmm_build(RbfKernel{1.0}, ztr, zv, 0.25);
            // arbitrary feasible warm start standing in for a previous batch
            Vec w0(6);
            for (auto& v : w0) v = std::abs(rng.normal());
            w0 = project(obj.constraint, w0);
            PgdConfig pc;
            pc.steps = 1;
            const PgdResult res = run(obj, w0, pc);
            CHECK(obj.value(res.point) <= obj.value(w0) + 1e-12);
        }
    }

    TEST_CASE("the step clamp bounds the l1 movement") {
        const Objective obj = synthetic_quadratic(Mat::identity(3), Vec{5, 5, 5}, 0.5);
        PgdConfig pc;
        pc.steps = 1;
        pc.eta = 1.0;
        pc.w2_clamp = 1e-3;
        const Vec x0(3, 1.0);
        const PgdResult res = run(obj, x0, pc);
        CHECK(norm1(sub(res.point, x0)) <= 1e-3 + 1e-9);
    }

    TEST_CASE("auto step size requires curvature information") {
        Objective obj;
        obj.kind = ObjectiveKind::kliep;
        obj.dim = 1;
        obj.constraint = NonnegOrthant{};
        obj.value = [](const Vec& w) { return -std::log(std::max(w[0], 1e-300)); };
        obj.grad = [](const Vec& w) { return Vec{-1.0 / std::max(w[0], 1e-300)}; };
        PgdConfig pc;
        CHECK_THROWS_AS(run(obj, Vec{1.0}, pc), config_error);
    }

    TEST_CASE("an infeasible start violates the contract") {
        const Objective obj = synthetic_quadratic(Mat::identity(2), Vec{1, 1}, 0.1);
        PgdConfig pc;
        CHECK_THROWS_AS(run(obj, Vec{5.0, 5.0}, pc), contract_error);
    }

    TEST_CASE("oracle agrees with the convergence mode on random instances") {
        Rng rng(97);
        for (int inst = 0; inst < 6; ++inst) {
            std::vector<Vec> ztr, zv;
            for (int i = 0; i < 6; ++i) ztr.push_back(Vec{rng.normal()});
            for (int j = 0; j < 4; ++j) zv.push_back(Vec{0.4 + rng.normal()});
            const Objective obj = (inst % 2 == 0)
                                      ? kmm_build(RbfKernel{1.0}, ztr, zv, 0.2)
                                      : lsif_build(BasisSet{zv}, RbfKernel{1.0}, ztr, zv, 1e-4);
            const Vec x0 = project(obj.constraint, Vec(obj.dim, 1.0));
            PgdConfig pc;
            pc.to_convergence = true;
            pc.tol = 1e-10;
            pc.max_iter = 200000;
            const double a = obj.value(run(obj, x0, pc).point);
            const double b = obj.value(oracle_solve(obj, x0));
            CHECK(std::abs(a - b) < 1e-4);
        }
    }

    TEST_CASE("oracle weights average to one when train equals val") {
        Rng rng(101);
        std::vector<Vec> z;
        for (int i = 0; i < 8; ++i) z.push_back(Vec{rng.normal()});
        const Objective obj = kmm_build(RbfKernel{1.0}, z, z, 0.2);
        Vec x0(8);
        for (auto& v : x0) v = std::abs(rng.normal());
        const Vec w = oracle_solve(obj, project(obj.constraint, x0));
        CHECK(std::abs(mean(w) - 1.0) < 1e-3);
    }

    TEST_CASE("oracle drives a heavily regularized lsif to zero") {
        Rng rng(103);
        std::vector<Vec> ztr, zv;
        for (int i = 0; i < 5; ++i) ztr.push_back(Vec{rng.normal()});
        for (int j = 0; j < 3; ++j) zv.push_back(Vec{rng.normal()});
        const Objective obj = lsif_build(BasisSet{zv}, RbfKernel{1.0}, ztr, zv, 3.0);
        const Vec beta = oracle_solve(obj, Vec(3, 0.7));
        for (double b : beta) CHECK(std::abs(b) <= 1e-6);
    }
}
