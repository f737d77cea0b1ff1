#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "driftwt/objectives.hpp"

namespace driftwt {

struct PgdConfig {
    int steps = 1;            // fixed-step mode: exactly this many update+project steps
    double eta = 0.0;         // <= 0 selects the automatic 1/L step (quadratics only)
    bool to_convergence = false;
    double tol = 1e-8;        // relative objective-change stop in convergence mode
    long long max_iter = 10000;
    std::optional<double> w2_clamp;  // cap on ||eta_t * grad||_1 when set
};

struct PgdResult {
    Vec point;
    std::vector<double> objective_trajectory;  // initial value, then one per accepted step
    long long iterations = 0;
    std::vector<double> step_seconds;
};

// Thrown when a step stays non-finite after 30 halvings of the step size.
struct step_failure : std::runtime_error {
    Vec last_point;
    step_failure(const std::string& msg, Vec point)
        : std::runtime_error(msg), last_point(std::move(point)) {}
};

// Step size 1 / L-hat where L-hat is a power-iteration estimate of the
// largest Hessian eigenvalue. Only quadratic objectives expose hess_vec.
inline double auto_step_size(const Objective& obj) {
    if (!obj.hess_vec)
        throw config_error("auto step size requires a quadratic objective; give eta explicitly");
    const double L = largest_eigenvalue_sym(obj.hess_vec, obj.dim, 30);
    return (L > 0) ? 1.0 / L : 1.0;
}

namespace detail {

// One projected step from x with step size eta, halving eta while the
// candidate evaluates non-finite. Returns the accepted point and value.
inline std::pair<Vec, double> pgd_step(const Objective& obj, const Vec& x, const Vec& g,
                                       double eta) {
    for (int halvings = 0; halvings <= 30; ++halvings) {
        Vec moved(x.size());
        bool finite = true;
        for (std::size_t i = 0; i < x.size(); ++i) {
            moved[i] = x[i] - eta * g[i];
            if (!std::isfinite(moved[i])) {
                finite = false;
                break;
            }
        }
        if (finite) {
            Vec cand = project(obj.constraint, moved);
            const double val = obj.value(cand);
            if (val < std::numeric_limits<double>::infinity() && !std::isnan(val))
                return {std::move(cand), val};
        }
        eta *= 0.5;
    }
    throw step_failure("pgd: step stayed non-finite after 30 halvings", x);
}

}  // namespace detail

// Projected gradient descent: x <- project(x - eta * grad(x)). Runs either a
// fixed number of steps or until the relative objective change drops below
// tol. The caller supplies a feasible starting point.
inline PgdResult run(const Objective& obj, const Vec& x0, const PgdConfig& cfg) {
    require(cfg.steps >= 1, "pgd: steps must be at least 1");
    require(cfg.tol > 0, "pgd: tol must be positive");
    require(x0.size() == obj.dim, "pgd: starting point dimension mismatch");
    require(is_feasible(obj.constraint, x0, 1e-6), "pgd: starting point must be feasible");

    const double eta_base = (cfg.eta > 0) ? cfg.eta : auto_step_size(obj);
    const long long iters = cfg.to_convergence ? cfg.max_iter : cfg.steps;

    PgdResult res;
    res.point = x0;
    double prev = obj.value(x0);
    res.objective_trajectory.push_back(prev);

    for (long long t = 1; t <= iters; ++t) {
        const auto tic = std::chrono::steady_clock::now();
        Vec g = obj.grad(res.point);
        if (!all_finite(g)) throw step_failure("pgd: non-finite gradient", res.point);

        double eta = eta_base;
        if (cfg.w2_clamp) {
            const double l1 = norm1(g);
            if (l1 > 0 && eta * l1 > *cfg.w2_clamp) eta = *cfg.w2_clamp / l1;
        }

        auto [cand, val] = detail::pgd_step(obj, res.point, g, eta);
        res.point = std::move(cand);
        res.objective_trajectory.push_back(val);
        res.iterations = t;
        res.step_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count());

        if (t % 10 == 0 && !is_feasible(obj.constraint, res.point, 1e-8))
            throw std::logic_error("pgd: iterate left the feasible set");

        if (cfg.to_convergence && std::isfinite(prev) &&
            std::abs(val - prev) <= cfg.tol * (1.0 + std::abs(val)))
            break;
        prev = val;
    }
    return res;
}

// Reference solver: diminishing steps eta_0 / sqrt(t) for 1e5 iterations.
// Intended as the solve-to-convergence oracle that few-step runs are compared
// against; applies to the convex objectives only. The default eta_0 is 10/L:
// diminishing steps drop below 2/L after a few iterations, and the larger
// total step mass copes with ill-conditioned instances.
inline Vec oracle_solve(const Objective& obj, const Vec& x0, double eta0 = 0.0) {
    require(obj.kind == ObjectiveKind::kmm || obj.kind == ObjectiveKind::kliep ||
                obj.kind == ObjectiveKind::lsif,
            "oracle_solve: convex objectives only");
    if (eta0 <= 0) eta0 = obj.hess_vec ? 10.0 * auto_step_size(obj) : 1.0;
    Vec x = project(obj.constraint, x0);
    for (long long t = 1; t <= 100000; ++t) {
        Vec g = obj.grad(x);
        if (!all_finite(g)) throw step_failure("oracle_solve: non-finite gradient", x);
        x = detail::pgd_step(obj, x, g, eta0 / std::sqrt(static_cast<double>(t))).first;
    }
    return x;
}

}  // namespace driftwt
