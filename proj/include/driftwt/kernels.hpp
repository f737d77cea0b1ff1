#pragma once

#include <cmath>
#include <vector>

#include "driftwt/numerics.hpp"

namespace driftwt {

// Gaussian RBF kernel k(u, v) = exp(-||u - v||^2 / (2 sigma^2)).
struct RbfKernel {
    double sigma = 1.0;
};

inline double rbf(const RbfKernel& k, const Vec& a, const Vec& b) {
    require(k.sigma > 0, "rbf: sigma must be positive");
    return std::exp(-sq_dist(a, b) / (2.0 * k.sigma * k.sigma));
}

// Kernel matrix between two point sets: result(i, j) = k(a_i, b_j).
// When both arguments are the same set the result is exactly symmetric with a
// unit diagonal.
inline Mat gram(const RbfKernel& k, const std::vector<Vec>& a, const std::vector<Vec>& b) {
    require(!a.empty() && !b.empty(), "gram: empty point set");
    Mat g(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) g(i, j) = rbf(k, a[i], b[j]);
    g.symmetric = (&a == &b);
    return g;
}

// Linear target vector of the kernel mean matching objective:
// result_i = (n_tr / n_v) * sum_j k(train_i, val_j).
inline Vec kmm_targets(const RbfKernel& k, const std::vector<Vec>& train,
                       const std::vector<Vec>& val) {
    require(!train.empty(), "kmm_targets: empty train set");
    require(!val.empty(), "kmm_targets: empty validation set");
    const double scale = static_cast<double>(train.size()) / static_cast<double>(val.size());
    Vec r(train.size(), 0.0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        double s = 0.0;
        for (const Vec& v : val) s += rbf(k, train[i], v);
        r[i] = scale * s;
    }
    return r;
}

// Basis functions for the linear-in-parameter ratio model, one RBF bump per
// center. Centers are taken from validation data.
struct BasisSet {
    std::vector<Vec> centers;
};

// psi(z): length-b vector with entries in (0, 1].
inline Vec features(const BasisSet& basis, const RbfKernel& k, const Vec& z) {
    require(!basis.centers.empty(), "features: basis must have at least one center");
    require(all_finite(z), "features: non-finite input");
    Vec f(basis.centers.size());
    for (std::size_t l = 0; l < basis.centers.size(); ++l) f[l] = rbf(k, z, basis.centers[l]);
    return f;
}

// Column mean of per-sample feature vectors (psi-bar over a point set).
inline Vec mean_features(const BasisSet& basis, const RbfKernel& k, const std::vector<Vec>& zs) {
    require(!zs.empty(), "mean_features: empty point set");
    Vec m(basis.centers.size(), 0.0);
    for (const Vec& z : zs) {
        const Vec f = features(basis, k, z);
        for (std::size_t l = 0; l < m.size(); ++l) m[l] += f[l];
    }
    const double inv = 1.0 / static_cast<double>(zs.size());
    for (auto& x : m) x *= inv;
    return m;
}

// Median pairwise Euclidean distance, used as the default kernel width. Large
// point sets are strided down to bound the quadratic cost. Pairs closer than
// 1e-9 of the largest distance count as coincident and are excluded, so a
// cluster of near-duplicate points cannot collapse the width. Falls back to 1
// when no usable pair remains.
inline double median_pairwise_distance(const std::vector<Vec>& pts) {
    if (pts.size() < 2) return 1.0;
    const std::size_t cap = 1024;
    const std::size_t stride = (pts.size() + cap - 1) / cap;
    std::vector<const Vec*> sel;
    for (std::size_t i = 0; i < pts.size(); i += stride) sel.push_back(&pts[i]);
    if (sel.size() < 2) return 1.0;
    std::vector<double> d;
    d.reserve(sel.size() * (sel.size() - 1) / 2);
    double d_max = 0.0;
    for (std::size_t i = 0; i < sel.size(); ++i)
        for (std::size_t j = i + 1; j < sel.size(); ++j) {
            d.push_back(std::sqrt(sq_dist(*sel[i], *sel[j])));
            d_max = std::max(d_max, d.back());
        }
    if (d_max <= 0.0) return 1.0;
    std::vector<double> kept;
    kept.reserve(d.size());
    for (double v : d)
        if (v > 1e-9 * d_max) kept.push_back(v);
    if (kept.empty()) return 1.0;
    auto mid = kept.begin() + static_cast<std::ptrdiff_t>(kept.size() / 2);
    std::nth_element(kept.begin(), mid, kept.end());
    return *mid;
}

}  // namespace driftwt
