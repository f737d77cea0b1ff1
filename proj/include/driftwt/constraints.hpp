#pragma once

#include <algorithm>
#include <cmath>
#include <variant>

#include "driftwt/numerics.hpp"

namespace driftwt {

// Feasible sets for weight estimation, each with an exact Euclidean
// projection.

// { w : w_i >= 0, |mean(w) - 1| <= epsilon }
struct NonnegMeanBand {
    double epsilon = 0.1;
};

// { b : b >= 0, a^T b = 1 } with a >= 0 entrywise and sum(a) > 0.
struct NonnegWeightedSumOne {
    Vec a;
};

// { b : b >= 0 }
struct NonnegOrthant {};

using ConstraintSet = std::variant<NonnegMeanBand, NonnegWeightedSumOne, NonnegOrthant>;

namespace detail {

// Projection onto the scaled simplex { w >= 0, sum(w) = c }, c > 0, by the
// sorted-threshold method: w = max(x - tau, 0) where tau makes the sum hit c.
// Scanning prefixes of the descending sort finds the active count exactly;
// once the membership test fails it fails for every longer prefix.
inline Vec project_scaled_simplex(const Vec& x, double c) {
    require(c > 0, "project_scaled_simplex: target sum must be positive");
    Vec s = x;
    std::sort(s.begin(), s.end(), std::greater<>());
    double prefix = 0.0;
    double tau = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        prefix += s[i];
        const double t = (prefix - c) / static_cast<double>(i + 1);
        if (s[i] - t > 0)
            tau = t;
        else
            break;
    }
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::max(x[i] - tau, 0.0);
    return out;
}

inline void validate(const NonnegMeanBand& set) {
    if (!(set.epsilon > 0)) throw config_error("NonnegMeanBand: epsilon must be positive");
}

inline void validate(const NonnegWeightedSumOne& set) {
    if (set.a.empty()) throw config_error("NonnegWeightedSumOne: empty coefficient vector");
    double s = 0.0;
    for (double v : set.a) {
        if (!(v >= 0) || !std::isfinite(v))
            throw config_error("NonnegWeightedSumOne: coefficients must be nonnegative and finite");
        s += v;
    }
    if (!(s > 0)) throw config_error("NonnegWeightedSumOne: coefficients must not all be zero");
}

inline void validate(const NonnegOrthant&) {}

}  // namespace detail

inline Vec project(const NonnegOrthant&, const Vec& x) {
    require(!x.empty() && all_finite(x), "project: input must be nonempty and finite");
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::max(x[i], 0.0);
    return out;
}

inline Vec project(const NonnegMeanBand& set, const Vec& x) {
    detail::validate(set);
    require(!x.empty() && all_finite(x), "project: input must be nonempty and finite");
    Vec clipped(x.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        clipped[i] = std::max(x[i], 0.0);
        s += clipped[i];
    }
    const double n = static_cast<double>(x.size());
    const double hi = n * (1.0 + set.epsilon);
    const double lo = n * (1.0 - set.epsilon);
    // If the orthant projection already lands inside the band it is the
    // projection onto the intersection. Otherwise the sum constraint is tight
    // at the violated bound and the problem reduces to a scaled simplex.
    if (s > hi) return detail::project_scaled_simplex(x, hi);
    if (s < lo && lo > 0) return detail::project_scaled_simplex(x, lo);
    return clipped;
}

inline Vec project(const NonnegWeightedSumOne& set, const Vec& x) {
    detail::validate(set);
    require(set.a.size() == x.size(), "project: dimension mismatch with coefficient vector");
    require(!x.empty() && all_finite(x), "project: input must be nonempty and finite");
    const Vec& a = set.a;
    const std::size_t n = x.size();

    // Work with coefficients scaled by their maximum so threshold arithmetic
    // stays representable even when some a_l sit near the underflow range.
    // Entries more than 120 decades below the maximum are treated as zero;
    // the induced constraint error is bounded by n * max|x| * 1e-120, far
    // below the 1e-10 target.
    double a_max = 0.0;
    for (double v : a) a_max = std::max(a_max, v);
    const double target = 1.0 / a_max;
    Vec u(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = a[i] / a_max;
        if (u[i] < 1e-120) u[i] = 0.0;
    }

    // beta(t) = max(x - t u, 0); phi(t) = u^T beta(t) is continuous,
    // nonincreasing and piecewise linear, with phi -> +inf as t -> -inf and
    // phi -> 0 as t -> +inf. Solve phi(t) = target by geometric bracketing
    // and bisection.
    auto phi = [&](double t) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (u[i] > 0.0) s += u[i] * std::max(x[i] - t * u[i], 0.0);
        return s;
    };

    double lo = 0.0, hi = 0.0, step = 1.0;
    int guard = 0;
    while (phi(lo) < target) {
        lo -= step;
        step *= 2.0;
        if (++guard > 4000 || !std::isfinite(lo))
            throw evaluation_error("project: weighted-sum projection out of range");
    }
    step = 1.0;
    guard = 0;
    while (phi(hi) > target) {
        hi += step;
        step *= 2.0;
        if (++guard > 4000 || !std::isfinite(hi))
            throw evaluation_error("project: weighted-sum projection out of range");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (phi(mid) >= target)
            lo = mid;
        else
            hi = mid;
    }
    double t = 0.5 * (lo + hi);

    // The bisection has pinned the linear segment; solving on its active set
    // gives the threshold exactly, which makes the projection idempotent to
    // roundoff.
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (u[i] > 0.0 && x[i] - t * u[i] > 0.0) {
            num += u[i] * x[i];
            den += u[i] * u[i];
        }
    }
    if (den > 0.0) {
        const double exact = (num - target) / den;
        if (std::isfinite(exact) && std::abs(phi(exact) - target) <= 1e-12 * std::max(1.0, target))
            t = exact;
    }

    Vec out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::max(x[i] - t * u[i], 0.0);
    require(all_finite(out), "project: non-finite projection output");
    return out;
}

inline Vec project(const ConstraintSet& set, const Vec& x) {
    return std::visit([&](const auto& s) { return project(s, x); }, set);
}

inline bool is_feasible(const NonnegOrthant&, const Vec& x, double tol) {
    require(tol >= 0, "is_feasible: tol must be nonnegative");
    for (double v : x)
        if (v < -tol) return false;
    return true;
}

inline bool is_feasible(const NonnegMeanBand& set, const Vec& x, double tol) {
    detail::validate(set);
    require(tol >= 0, "is_feasible: tol must be nonnegative");
    if (x.empty()) return false;
    for (double v : x)
        if (v < -tol) return false;
    return std::abs(mean(x) - 1.0) <= set.epsilon + tol;
}

inline bool is_feasible(const NonnegWeightedSumOne& set, const Vec& x, double tol) {
    detail::validate(set);
    require(tol >= 0, "is_feasible: tol must be nonnegative");
    require(set.a.size() == x.size(), "is_feasible: dimension mismatch");
    for (double v : x)
        if (v < -tol) return false;
    return std::abs(dot(set.a, x) - 1.0) <= tol;
}

inline bool is_feasible(const ConstraintSet& set, const Vec& x, double tol) {
    return std::visit([&](const auto& s) { return is_feasible(s, x, tol); }, set);
}

}  // namespace driftwt
