#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>

#include "driftwt/common.hpp"

namespace driftwt {

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double dot(const Vec& a, const Vec& b) {
    require(a.size() == b.size(), "dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double sq_dist(const Vec& a, const Vec& b) {
    require(a.size() == b.size(), "sq_dist: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double norm1(const Vec& a) {
    double s = 0.0;
    for (double x : a) s += std::abs(x);
    return s;
}

inline double sum(const Vec& a) { return std::accumulate(a.begin(), a.end(), 0.0); }

inline double mean(const Vec& a) {
    require(!a.empty(), "mean: empty vector");
    return sum(a) / static_cast<double>(a.size());
}

inline Vec add(const Vec& a, const Vec& b) {
    require(a.size() == b.size(), "add: length mismatch");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
    require(a.size() == b.size(), "sub: length mismatch");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec scaled(const Vec& a, double c) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
    return r;
}

// Dense row-major matrix. Dimensions are fixed at construction; the
// `symmetric` flag is set by producers that guarantee entries(i,j) ==
// entries(j,i) (e.g. a Gram matrix over a single point set).
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
    bool symmetric = false;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static Mat identity(std::size_t n) {
        Mat m(n, n, 0.0);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        m.symmetric = true;
        return m;
    }
};

inline Vec gemv(const Mat& m, const Vec& v) {
    require(m.cols == v.size(), "gemv: dimension mismatch");
    Vec r(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.data.data() + i * m.cols;
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += row[j] * v[j];
        r[i] = s;
    }
    return r;
}

// SplitMix64 generator (Steele, Lea and Flood, 2014). Implemented here rather
// than using a platform engine so that a given seed produces the identical
// stream everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1) from the top 53 bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    std::uint64_t below(std::uint64_t n) {
        require(n > 0, "Rng::below: n must be positive");
        const std::uint64_t t = (~std::uint64_t{0} % n + 1) % n;  // 2^64 mod n
        std::uint64_t r = next_u64();
        if (t != 0) {
            const std::uint64_t bound = ~std::uint64_t{0} - t + 1;  // 2^64 - t
            while (r >= bound) r = next_u64();
        }
        return r % n;
    }

    // Standard normal via the Marsaglia polar method (second value cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    template <class T>
    void shuffle(std::vector<T>& xs) {
        for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[below(i)]);
    }

    // Derives a seed for an independent stream from a base seed and a salt.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 0x632BE59BD9B4E019ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Central-difference check of an analytic gradient. Returns
// max_i |grad_i - fd_i| / (|grad_i| + 1e-8).
inline double check_gradient(const std::function<double(const Vec&)>& f,
                             const std::function<Vec(const Vec&)>& grad, const Vec& x, double h) {
    require(h > 0, "check_gradient: h must be positive");
    Vec g = grad(x);
    require(g.size() == x.size(), "check_gradient: gradient dimension mismatch");
    Vec p = x;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        p[i] = x[i] + h;
        const double fp = f(p);
        p[i] = x[i] - h;
        const double fm = f(p);
        p[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw evaluation_error("check_gradient: non-finite objective value");
        const double fd = (fp - fm) / (2.0 * h);
        worst = std::max(worst, std::abs(g[i] - fd) / (std::abs(g[i]) + 1e-8));
    }
    return worst;
}

// Dominant eigenvalue magnitude of a symmetric operator by power iteration.
// The probe vector is deterministic so results are reproducible.
inline double largest_eigenvalue_sym(const std::function<Vec(const Vec&)>& apply, std::size_t n,
                                     int iters = 30) {
    require(n > 0, "largest_eigenvalue_sym: empty operator");
    Vec v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = 1.0 + static_cast<double>(i + 1) / static_cast<double>(n + 1);
    double inv = 1.0 / norm2(v);
    for (auto& x : v) x *= inv;
    double lambda = 0.0;
    for (int it = 0; it < iters; ++it) {
        Vec w = apply(v);
        require(w.size() == n, "largest_eigenvalue_sym: operator dimension mismatch");
        const double nw = norm2(w);
        if (nw == 0.0) return 0.0;
        lambda = dot(v, w);
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    }
    return std::abs(lambda);
}

}  // namespace driftwt
