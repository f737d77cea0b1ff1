#pragma once

#include <iostream>

#include "driftwt/critic.hpp"
#include "driftwt/metrics.hpp"
#include "driftwt/model.hpp"
#include "driftwt/objectives.hpp"
#include "driftwt/pgd.hpp"
#include "driftwt/weights.hpp"

namespace driftwt {

// Fast end-to-end invariant battery behind the `selftest` CLI subcommand.
// Returns 0 when every check passes.
inline int run_selftest(std::ostream& os = std::cout) {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        os << (ok ? "ok   " : "FAIL ") << name << "\n";
        if (!ok) ++failures;
    };

    // deterministic rng streams
    {
        Rng a(42), b(42);
        bool same = true;
        for (int i = 0; i < 1000; ++i) same = same && (a.next_u64() == b.next_u64());
        check("rng: equal seeds give identical streams", same);
    }

    // gemv linearity
    {
        Rng rng(3);
        Mat m(5, 4);
        for (auto& v : m.data) v = rng.normal();
        Vec u(4), v(4);
        for (auto& x : u) x = rng.normal();
        for (auto& x : v) x = rng.normal();
        const Vec lhs = gemv(m, add(scaled(u, 2.0), scaled(v, -3.0)));
        const Vec rhs = add(scaled(gemv(m, u), 2.0), scaled(gemv(m, v), -3.0));
        bool ok = true;
        for (std::size_t i = 0; i < lhs.size(); ++i)
            ok = ok && std::abs(lhs[i] - rhs[i]) <= 1e-10 * (1.0 + std::abs(rhs[i]));
        check("numerics: gemv is linear", ok);
    }

    // projections: feasibility and idempotence
    {
        Rng rng(11);
        bool ok = true;
        for (int trial = 0; trial < 300 && ok; ++trial) {
            const std::size_t n = 2 + rng.below(12);
            Vec x(n);
            for (auto& v : x) v = 4.0 * rng.normal();
            Vec a(n);
            for (auto& v : a) v = rng.uniform(0.05, 1.0);
            const ConstraintSet sets[3] = {NonnegMeanBand{0.2}, NonnegWeightedSumOne{a},
                                           NonnegOrthant{}};
            for (const auto& set : sets) {
                const Vec p = project(set, x);
                const Vec pp = project(set, p);
                ok = ok && is_feasible(set, p, 1e-9);
                for (std::size_t i = 0; i < n; ++i) ok = ok && std::abs(p[i] - pp[i]) <= 1e-12;
            }
        }
        check("constraints: projections feasible and idempotent", ok);
    }

    // analytic gradients vs central differences
    {
        Rng rng(17);
        std::vector<Vec> ztr, zv;
        for (int i = 0; i < 6; ++i) ztr.push_back(Vec{rng.normal(), rng.normal()});
        for (int i = 0; i < 4; ++i) zv.push_back(Vec{rng.normal(), rng.normal()});
        const RbfKernel kern{1.0};
        const Objective kmm = kmm_build(kern, ztr, zv, 0.1);
        const BasisSet basis{zv};
        const Objective kliep = kliep_build(basis, kern, ztr, zv);
        const Objective lsif = lsif_build(basis, kern, ztr, zv, 1e-5);
        Vec w(6, 1.0), beta(4, 0.5);
        bool ok = check_gradient(kmm.value, kmm.grad, w, 1e-5) < 1e-4;
        ok = ok && check_gradient(kliep.value, kliep.grad, beta, 1e-6) < 1e-4;
        ok = ok && check_gradient(lsif.value, lsif.grad, beta, 1e-5) < 1e-4;
        check("objectives: gradients match central differences", ok);
    }

    // critic parameter gradient including the penalty term
    {
        Rng rng(23);
        Critic critic(2, 4, 10.0, rng);
        std::vector<Vec> ztr = {{0.3, -0.2}, {1.0, 0.4}, {-0.5, 0.8}};
        std::vector<Vec> zv = {{0.9, 0.1}, {-0.3, -0.6}};
        Vec tw{0.7, 1.6, 0.4};
        Rng prng(5);
        const InterpolationPlan plan = make_interpolation_plan(3, 2, tw, prng);
        auto f = [&](const Vec& p) {
            Critic c = critic;
            c.params() = p;
            return c.penalized_loss(ztr, tw, zv, plan).value;
        };
        auto g = [&](const Vec& p) {
            Critic c = critic;
            c.params() = p;
            return c.penalized_loss(ztr, tw, zv, plan).grad;
        };
        check("critic: penalized loss gradient matches central differences",
              check_gradient(f, g, critic.params(), 1e-6) < 1e-4);
    }

    // classifier loss gradient
    {
        Rng rng(29);
        Classifier model(2, 5, 3, OptimizerKind::sgd, rng);
        std::vector<Vec> xs = {{0.2, -1.0}, {1.4, 0.3}, {-0.7, 0.9}};
        std::vector<int> ys = {0, 2, 1};
        Vec w(3, 1.0);
        auto f = [&](const Vec& p) {
            Classifier m = model;
            m.params() = p;
            return mean(m.forward_loss(xs, ys).losses);
        };
        auto g = [&](const Vec& p) {
            Classifier m = model;
            m.params() = p;
            return m.weighted_loss_grad(xs, ys, m.forward_loss(xs, ys), w);
        };
        check("model: loss gradient matches central differences",
              check_gradient(f, g, model.params(), 1e-6) < 1e-4);
    }

    // pgd monotone on a quadratic with eta = 1/L
    {
        Rng rng(31);
        std::vector<Vec> ztr, zv;
        for (int i = 0; i < 8; ++i) ztr.push_back(Vec{rng.normal()});
        for (int i = 0; i < 5; ++i) zv.push_back(Vec{rng.normal() + 0.5});
        const Objective obj = kmm_build(RbfKernel{1.0}, ztr, zv, 0.2);
        PgdConfig pc;
        pc.to_convergence = true;
        pc.tol = 1e-12;
        pc.max_iter = 500;
        const PgdResult res = run(obj, Vec(8, 1.0), pc);
        bool ok = is_feasible(obj.constraint, res.point, 1e-8);
        for (std::size_t i = 1; i < res.objective_trajectory.size(); ++i)
            ok = ok && res.objective_trajectory[i] <= res.objective_trajectory[i - 1] + 1e-10;
        check("pgd: monotone trajectory at eta = 1/L", ok);
    }

    // weight store round trip
    {
        WeightStore ws(5);
        ws.scatter({1, 3}, Vec{0.5, 2.0});
        const Vec got = ws.gather({3, 1, 0});
        check("weights: scatter/gather round trip",
              got[0] == 2.0 && got[1] == 0.5 && got[2] == 1.0);
    }

    // nmse scale invariance
    {
        Vec oracle{1.0, 2.0, 3.0, 4.0};
        check("metrics: nmse is scale invariant",
              we_nmse(scaled(oracle, 7.5), oracle) < 1e-24);
    }

    os << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
    return failures == 0 ? 0 : 1;
}

}  // namespace driftwt
