#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "driftwt/optim.hpp"

namespace driftwt {

// Interpolation points for the critic's gradient penalty: point k is
// mix[k] * val[val_idx[k]] + (1 - mix[k]) * train[train_idx[k]].
struct InterpolationPlan {
    std::vector<std::size_t> val_idx;
    std::vector<std::size_t> train_idx;
    Vec mix;
};

// min(n_tr, n_v) pairs with replacement; the validation endpoint is uniform
// and the training endpoint is drawn proportionally to the current weights
// (uniform when all weights are zero).
inline InterpolationPlan make_interpolation_plan(std::size_t n_tr, std::size_t n_v,
                                                 const Vec& train_weights, Rng& rng) {
    require(n_tr >= 1 && n_v >= 1, "make_interpolation_plan: need train and validation samples");
    require(train_weights.size() == n_tr, "make_interpolation_plan: weight length mismatch");
    Vec cdf(n_tr, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n_tr; ++i) {
        require(train_weights[i] >= 0, "make_interpolation_plan: weights must be nonnegative");
        total += train_weights[i];
        cdf[i] = total;
    }
    InterpolationPlan plan;
    const std::size_t m = std::min(n_tr, n_v);
    plan.val_idx.resize(m);
    plan.train_idx.resize(m);
    plan.mix.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        plan.val_idx[k] = rng.below(n_v);
        if (total > 0.0) {
            const double u = rng.uniform() * total;
            plan.train_idx[k] = static_cast<std::size_t>(
                std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            if (plan.train_idx[k] >= n_tr) plan.train_idx[k] = n_tr - 1;
        } else {
            plan.train_idx[k] = rng.below(n_tr);
        }
        plan.mix[k] = rng.uniform();
    }
    return plan;
}

// Two-layer tanh critic:phi(z) = w2^T tanh(W1 z + b1) + b2. The smooth
// activation keeps the input gradient defined everywhere, which the gradient
// penalty differentiates a second time with respect to the parameters.
class Critic {
public:
    Critic(std::size_t input_dim, std::size_t hidden_dim, double kappa, Rng& rng)
        : in_(input_dim),
          hid_(hidden_dim),
          kappa_(kappa),
          params_(input_dim * hidden_dim + 2 * hidden_dim + 1, 0.0),
          adam_(params_.size()) {
        require(input_dim >= 1 && hidden_dim >= 1, "Critic: dimensions must be positive");
        require(kappa > 0, "Critic: kappa must be positive");
        const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
        for (std::size_t i = 0; i < hid_ * in_; ++i) params_[i] = s1 * rng.normal();
        for (std::size_t r = 0; r < hid_; ++r) params_[off_w2() + r] = s2 * rng.normal();
    }

    std::size_t input_dim() const { return in_; }
    std::size_t hidden_dim() const { return hid_; }
    double kappa() const { return kappa_; }
    Vec& params() { return params_; }
    const Vec& params() const { return params_; }

    struct Eval {
        double value = 0.0;
        Vec input_grad;
    };

    // Value and exact input gradient at z.
    Eval forward(const Vec& z) const {
        require(z.size() == in_, "Critic::forward: input dimension mismatch");
        Vec t(hid_), s(hid_);
        Eval out;
        out.value = hidden(z, t, s);
        out.input_grad.assign(in_, 0.0);
        for (std::size_t r = 0; r < hid_; ++r) {
            const double c = params_[off_w2() + r] * s[r];
            const double* w1r = params_.data() + r * in_;
            for (std::size_t c2 = 0; c2 < in_; ++c2) out.input_grad[c2] += c * w1r[c2];
        }
        return out;
    }

    double value(const Vec& z) const {
        Vec t(hid_), s(hid_);
        return hidden(z, t, s);
    }

    Vec values(const std::vector<Vec>& zs) const {
        Vec v(zs.size());
        for (std::size_t i = 0; i < zs.size(); ++i) v[i] = value(zs[i]);
        return v;
    }

    struct LossGrad {
        double value = 0.0;
        Vec grad;
    };

    // Penalized critic loss
    //   (1/n_tr) sum_i w_i phi(z_i^tr) - (1/n_v) sum_j phi(z_j^v)
    //   + kappa (1/m) sum_k (||grad_z phi(z~_k)|| - 1)^2
    // with its exact parameter gradient, including the second-order term from
    // differentiating the input-gradient norm. Descending this loss maximizes
    // the dual gap while pushing the critic toward unit input-gradient norm.
    LossGrad penalized_loss(const std::vector<Vec>& train_reps, const Vec& train_weights,
                            const std::vector<Vec>& val_reps, const InterpolationPlan& plan,
                            bool penalty_active = true) const {
        require(!train_reps.empty() && !val_reps.empty(),
                "Critic::penalized_loss: need train and validation samples");
        require(train_weights.size() == train_reps.size(),
                "Critic::penalized_loss: weight length mismatch");
        for (double w : train_weights)
            require(w >= 0, "Critic::penalized_loss: weights must be nonnegative");

        LossGrad out;
        out.grad.assign(params_.size(), 0.0);
        Vec t(hid_), s(hid_);

        const double inv_tr = 1.0 / static_cast<double>(train_reps.size());
        for (std::size_t i = 0; i < train_reps.size(); ++i)
            accumulate_value_grad(train_reps[i], train_weights[i] * inv_tr, t, s, out);
        const double inv_v = -1.0 / static_cast<double>(val_reps.size());
        for (const Vec& z : val_reps) accumulate_value_grad(z, inv_v, t, s, out);

        if (penalty_active && !plan.mix.empty()) {
            const double coef = kappa_ / static_cast<double>(plan.mix.size());
            Vec zt(in_);
            for (std::size_t k = 0; k < plan.mix.size(); ++k) {
                const Vec& zv = val_reps[plan.val_idx[k]];
                const Vec& ztr = train_reps[plan.train_idx[k]];
                const double u = plan.mix[k];
                for (std::size_t c = 0; c < in_; ++c) zt[c] = u * zv[c] + (1.0 - u) * ztr[c];
                out.value += coef * accumulate_penalty_grad(zt, coef, t, s, out.grad);
            }
        }
        return out;
    }

    LossGrad penalized_loss(const std::vector<Vec>& train_reps, const Vec& train_weights,
                            const std::vector<Vec>& val_reps, Rng& rng,
                            bool penalty_active = true) const {
        const InterpolationPlan plan =
            make_interpolation_plan(train_reps.size(), val_reps.size(), train_weights, rng);
        return penalized_loss(train_reps, train_weights, val_reps, plan, penalty_active);
    }

    // One Adam update on the penalized loss. penalty_active is false during
    // the warm-start phase, which trains on the first two terms only.
    void train_step(const std::vector<Vec>& train_reps, const Vec& train_weights,
                    const std::vector<Vec>& val_reps, double learning_rate, Rng& rng,
                    bool penalty_active = true) {
        require(learning_rate > 0, "Critic::train_step: learning rate must be positive");
        const LossGrad lg = penalized_loss(train_reps, train_weights, val_reps, rng, penalty_active);
        adam_step(adam_, params_, lg.grad, learning_rate);
    }

private:
    std::size_t off_b1() const { return hid_ * in_; }
    std::size_t off_w2() const { return hid_ * in_ + hid_; }
    std::size_t off_b2() const { return hid_ * in_ + 2 * hid_; }

    // Fills t = tanh(W1 z + b1) and s = 1 - t^2, returns the output value.
    double hidden(const Vec& z, Vec& t, Vec& s) const {
        double val = params_[off_b2()];
        for (std::size_t r = 0; r < hid_; ++r) {
            const double* w1r = params_.data() + r * in_;
            double a = params_[off_b1() + r];
            for (std::size_t c = 0; c < in_; ++c) a += w1r[c] * z[c];
            t[r] = std::tanh(a);
            s[r] = 1.0 - t[r] * t[r];
            val += params_[off_w2() + r] * t[r];
        }
        return val;
    }

    // out.value += coef * phi(z); out.grad += coef * d phi / d params.
    void accumulate_value_grad(const Vec& z, double coef, Vec& t, Vec& s, LossGrad& out) const {
        require(z.size() == in_, "Critic: input dimension mismatch");
        out.value += coef * hidden(z, t, s);
        out.grad[off_b2()] += coef;
        for (std::size_t r = 0; r < hid_; ++r) {
            out.grad[off_w2() + r] += coef * t[r];
            const double db1 = coef * params_[off_w2() + r] * s[r];
            out.grad[off_b1() + r] += db1;
            double* gW1r = out.grad.data() + r * in_;
            for (std::size_t c = 0; c < in_; ++c) gW1r[c] += db1 * z[c];
        }
    }

    // Adds coef * d(||grad_z phi(z)|| - 1)^2 / d params to grad and returns
    // the unscaled penalty value (||g|| - 1)^2. Derivation: with
    // u = w2 .* s and g = W1^T u, for v = 2(||g||-1)/||g|| * g and q = W1 v,
    //   dP/d w2 = q .* s
    //   dP/d b1 = -2 q .* w2 .* t .* s
    //   dP/d W1 = u v^T + (-2 q .* w2 .* t .* s) z^T.
    double accumulate_penalty_grad(const Vec& z, double coef, Vec& t, Vec& s, Vec& grad) const {
        hidden(z, t, s);
        Vec u(hid_), g(in_, 0.0);
        for (std::size_t r = 0; r < hid_; ++r) {
            u[r] = params_[off_w2() + r] * s[r];
            const double* w1r = params_.data() + r * in_;
            for (std::size_t c = 0; c < in_; ++c) g[c] += u[r] * w1r[c];
        }
        const double ng = norm2(g);
        const double pen = (ng - 1.0) * (ng - 1.0);
        if (ng < 1e-12) return pen;  // subgradient 0 at the kink
        const double cfac = 2.0 * (ng - 1.0) / ng;
        Vec v(in_);
        for (std::size_t c = 0; c < in_; ++c) v[c] = cfac * g[c];
        for (std::size_t r = 0; r < hid_; ++r) {
            const double* w1r = params_.data() + r * in_;
            double q = 0.0;
            for (std::size_t c = 0; c < in_; ++c) q += w1r[c] * v[c];
            grad[off_w2() + r] += coef * q * s[r];
            const double db1 = coef * (-2.0) * q * params_[off_w2() + r] * t[r] * s[r];
            grad[off_b1() + r] += db1;
            double* gW1r = grad.data() + r * in_;
            for (std::size_t c = 0; c < in_; ++c) gW1r[c] += coef * u[r] * v[c] + db1 * z[c];
        }
        return pen;
    }

    std::size_t in_, hid_;
    double kappa_;
    Vec params_;
    AdamState adam_;
};

}  // namespace driftwt
