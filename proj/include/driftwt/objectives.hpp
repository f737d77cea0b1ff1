#pragma once

#include <limits>
#include <memory>

#include "driftwt/constraints.hpp"
#include "driftwt/kernels.hpp"

namespace driftwt {

enum class ObjectiveKind { kmm, kliep, lsif, w1 };

// Basis-function model shared by the parametric estimators; needed to map
// fitted parameters back to per-sample weights.
struct BasisModel {
    BasisSet basis;
    RbfKernel kernel;
};

// A weight-estimation problem: differentiable value and gradient over a
// weight or parameter vector, plus the feasible set. Quadratic problems also
// expose a Hessian-vector product for step-size estimation. Problem data is
// owned by the closures.
struct Objective {
    ObjectiveKind kind = ObjectiveKind::kmm;
    std::size_t dim = 0;
    ConstraintSet constraint;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;
    std::function<Vec(const Vec&)> hess_vec;  // null unless quadratic
    std::shared_ptr<const BasisModel> basis_model;  // kliep/lsif only
};

// Kernel mean matching: J(w) = w^T K w - 2 k^T w over the nonnegative mean
// band.
inline Objective kmm_build(const RbfKernel& kernel, const std::vector<Vec>& train_reps,
                           const std::vector<Vec>& val_reps, double epsilon) {
    require(!train_reps.empty() && !val_reps.empty(), "kmm_build: empty representations");
    auto K = std::make_shared<Mat>(gram(kernel, train_reps, train_reps));
    auto k = std::make_shared<Vec>(kmm_targets(kernel, train_reps, val_reps));

    Objective obj;
    obj.kind = ObjectiveKind::kmm;
    obj.dim = train_reps.size();
    obj.constraint = NonnegMeanBand{epsilon};
    obj.value = [K, k](const Vec& w) { return dot(w, gemv(*K, w)) - 2.0 * dot(*k, w); };
    obj.grad = [K, k](const Vec& w) {
        Vec g = gemv(*K, w);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * g[i] - 2.0 * (*k)[i];
        return g;
    };
    obj.hess_vec = [K](const Vec& v) {
        Vec h = gemv(*K, v);
        for (auto& x : h) x *= 2.0;
        return h;
    };
    return obj;
}

// KLIEP: J(beta) = -(1/n_v) sum_i log(beta^T psi(z_i^v)) subject to beta >= 0
// and psi_bar_tr^T beta = 1. Evaluations where some beta^T psi underflows
// return +inf, which the PGD engine treats as a failed step.
inline Objective kliep_build(const BasisSet& basis, const RbfKernel& kernel,
                             const std::vector<Vec>& train_reps,
                             const std::vector<Vec>& val_reps) {
    require(!basis.centers.empty(), "kliep_build: basis must have at least one center");
    require(!train_reps.empty() && !val_reps.empty(), "kliep_build: empty representations");
    auto val_feats = std::make_shared<std::vector<Vec>>();
    val_feats->reserve(val_reps.size());
    for (const Vec& z : val_reps) val_feats->push_back(features(basis, kernel, z));

    Objective obj;
    obj.kind = ObjectiveKind::kliep;
    obj.dim = basis.centers.size();
    obj.constraint = NonnegWeightedSumOne{mean_features(basis, kernel, train_reps)};
    obj.basis_model = std::make_shared<const BasisModel>(BasisModel{basis, kernel});
    obj.value = [val_feats](const Vec& beta) {
        double s = 0.0;
        for (const Vec& f : *val_feats) {
            const double m = dot(beta, f);
            if (m <= 1e-300) return std::numeric_limits<double>::infinity();
            s -= std::log(m);
        }
        return s / static_cast<double>(val_feats->size());
    };
    obj.grad = [val_feats](const Vec& beta) {
        Vec g(beta.size(), 0.0);
        for (const Vec& f : *val_feats) {
            const double m = std::max(dot(beta, f), 1e-300);
            for (std::size_t l = 0; l < g.size(); ++l) g[l] -= f[l] / m;
        }
        const double inv = 1.0 / static_cast<double>(val_feats->size());
        for (auto& x : g) x *= inv;
        return g;
    };
    return obj;
}

// Least-squares importance fitting:
// J(beta) = 1/2 beta^T H beta - h^T beta + lambda * 1^T beta over the
// nonnegative orthant, with H and h the train/validation feature moments.
inline Objective lsif_build(const BasisSet& basis, const RbfKernel& kernel,
                            const std::vector<Vec>& train_reps, const std::vector<Vec>& val_reps,
                            double lambda) {
    require(!basis.centers.empty(), "lsif_build: basis must have at least one center");
    require(!train_reps.empty() && !val_reps.empty(), "lsif_build: empty representations");
    require(lambda >= 0, "lsif_build: lambda must be nonnegative");
    const std::size_t b = basis.centers.size();

    auto H = std::make_shared<Mat>(b, b, 0.0);
    for (const Vec& z : train_reps) {
        const Vec f = features(basis, kernel, z);
        for (std::size_t l = 0; l < b; ++l)
            for (std::size_t m = 0; m < b; ++m) (*H)(l, m) += f[l] * f[m];
    }
    const double inv_tr = 1.0 / static_cast<double>(train_reps.size());
    for (auto& x : H->data) x *= inv_tr;
    H->symmetric = true;
    auto h = std::make_shared<Vec>(mean_features(basis, kernel, val_reps));

    Objective obj;
    obj.kind = ObjectiveKind::lsif;
    obj.dim = b;
    obj.constraint = NonnegOrthant{};
    obj.basis_model = std::make_shared<const BasisModel>(BasisModel{basis, kernel});
    obj.value = [H, h, lambda](const Vec& beta) {
        return 0.5 * dot(beta, gemv(*H, beta)) - dot(*h, beta) + lambda * sum(beta);
    };
    obj.grad = [H, h, lambda](const Vec& beta) {
        Vec g = gemv(*H, beta);
        for (std::size_t l = 0; l < g.size(); ++l) g[l] += lambda - (*h)[l];
        return g;
    };
    obj.hess_vec = [H](const Vec& v) { return gemv(*H, v); };
    return obj;
}

// Per-sample weights induced by fitted parameters: w_i = beta^T psi(z_i).
inline Vec weights_from_params(const Objective& obj, const Vec& beta,
                               const std::vector<Vec>& train_reps) {
    require(obj.kind == ObjectiveKind::kliep || obj.kind == ObjectiveKind::lsif,
            "weights_from_params: objective is not parametric");
    require(obj.basis_model != nullptr, "weights_from_params: missing basis model");
    Vec w(train_reps.size());
    for (std::size_t i = 0; i < train_reps.size(); ++i)
        w[i] = dot(beta, features(obj.basis_model->basis, obj.basis_model->kernel, train_reps[i]));
    return w;
}

// Gradient of the Wasserstein-1 dual gap with respect to per-sample weights
// under the empirical training measure: g_i = -critic(z_i) / n_tr.
inline Vec w1_weight_gradient(const Vec& critic_values_on_train, std::size_t n_tr) {
    require(n_tr >= 1, "w1_weight_gradient: n_tr must be positive");
    require(critic_values_on_train.size() == n_tr,
            "w1_weight_gradient: critic value count must equal n_tr");
    require(all_finite(critic_values_on_train), "w1_weight_gradient: non-finite critic values");
    Vec g(n_tr);
    const double inv = 1.0 / static_cast<double>(n_tr);
    for (std::size_t i = 0; i < n_tr; ++i) g[i] = -critic_values_on_train[i] * inv;
    return g;
}

// Linear weight objective for a frozen critic. Its gradient is constant; its
// value is the negated dual gap estimate, so PGD on it raises the weighted
// training mean of the critic toward the validation mean.
inline Objective w1_build(const Vec& critic_values_on_train, const Vec& critic_values_on_val,
                          double epsilon) {
    require(!critic_values_on_train.empty() && !critic_values_on_val.empty(),
            "w1_build: empty critic values");
    auto g = std::make_shared<Vec>(
        w1_weight_gradient(critic_values_on_train, critic_values_on_train.size()));
    const double val_mean = mean(critic_values_on_val);

    Objective obj;
    obj.kind = ObjectiveKind::w1;
    obj.dim = critic_values_on_train.size();
    obj.constraint = NonnegMeanBand{epsilon};
    obj.value = [g, val_mean](const Vec& w) { return val_mean + dot(*g, w); };
    obj.grad = [g](const Vec&) { return *g; };
    return obj;
}

}  // namespace driftwt
