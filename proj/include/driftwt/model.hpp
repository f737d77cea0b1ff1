#pragma once

#include <cmath>
#include <vector>

#include "driftwt/optim.hpp"

namespace driftwt {

// One-hidden-layer tanh MLP with softmax cross-entropy, manual gradients and
// a pluggable SGD/Adam update. Parameters live in one flat vector
// [W1 (h x d), b1, W2 (C x h), b2] so optimizers and finite-difference checks
// operate on plain vectors.
class Classifier {
public:
    Classifier(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
               OptimizerKind opt, Rng& rng)
        : in_(input_dim),
          hid_(hidden_dim),
          classes_(num_classes),
          opt_(opt),
          params_(hidden_dim * input_dim + hidden_dim + num_classes * hidden_dim + num_classes,
                  0.0),
          adam_(params_.size()) {
        require(input_dim >= 1 && hidden_dim >= 1 && num_classes >= 2,
                "Classifier: need d >= 1, h >= 1, C >= 2");
        const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
        for (std::size_t i = 0; i < hid_ * in_; ++i) params_[i] = s1 * rng.normal();
        for (std::size_t i = 0; i < classes_ * hid_; ++i)
            params_[off_w2() + i] = s2 * rng.normal();
    }

    std::size_t input_dim() const { return in_; }
    std::size_t hidden_dim() const { return hid_; }
    std::size_t num_classes() const { return classes_; }
    Vec& params() { return params_; }
    const Vec& params() const { return params_; }

    // Cached batch forward pass: tanh activations, softmax rows and
    // per-sample losses. Losses are -log of the true-class probability with
    // the probability clamped into [1e-12, 1 - 1e-15], so they stay finite
    // and strictly positive.
    struct BatchEval {
        Mat hidden;  // n x h
        Mat probs;   // n x C
        Vec losses;  // n
    };

    BatchEval forward_loss(const std::vector<Vec>& xs, const std::vector<int>& ys) const {
        require(xs.size() == ys.size(), "forward_loss: feature/label count mismatch");
        require(!xs.empty(), "forward_loss: empty batch");
        BatchEval ev;
        ev.hidden = Mat(xs.size(), hid_);
        ev.probs = Mat(xs.size(), classes_);
        ev.losses.resize(xs.size());
        Vec logits(classes_);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            require(ys[i] >= 0 && static_cast<std::size_t>(ys[i]) < classes_,
                    "forward_loss: label out of range");
            require(xs[i].size() == in_, "forward_loss: input dimension mismatch");
            forward_one(xs[i], &ev.hidden(i, 0), logits);
            softmax_inplace(logits, &ev.probs(i, 0));
            const double p =
                std::min(std::max(ev.probs(i, static_cast<std::size_t>(ys[i])), 1e-12),
                         1.0 - 1e-15);
            ev.losses[i] = -std::log(p);
        }
        return ev;
    }

    Vec logits(const Vec& x) const {
        require(x.size() == in_, "logits: input dimension mismatch");
        Vec t(hid_), out(classes_);
        forward_one(x, t.data(), out);
        return out;
    }

    // Gradient of (1/n) sum_i w_i * loss_i with respect to the flat
    // parameters, reusing the cached forward pass.
    Vec weighted_loss_grad(const std::vector<Vec>& xs, const std::vector<int>& ys,
                           const BatchEval& ev, const Vec& weights) const {
        require(weights.size() == xs.size(), "weighted_loss_grad: weight count mismatch");
        const double inv_n = 1.0 / static_cast<double>(xs.size());
        Vec grad(params_.size(), 0.0);
        Vec dlogit(classes_), dhid(hid_);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double coef = weights[i] * inv_n;
            if (coef == 0.0) continue;
            for (std::size_t c = 0; c < classes_; ++c) dlogit[c] = coef * ev.probs(i, c);
            dlogit[static_cast<std::size_t>(ys[i])] -= coef;
            // output layer
            for (std::size_t c = 0; c < classes_; ++c) {
                grad[off_b2() + c] += dlogit[c];
                double* gw2 = grad.data() + off_w2() + c * hid_;
                for (std::size_t r = 0; r < hid_; ++r) gw2[r] += dlogit[c] * ev.hidden(i, r);
            }
            // hidden layer through tanh
            for (std::size_t r = 0; r < hid_; ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < classes_; ++c)
                    s += dlogit[c] * params_[off_w2() + c * hid_ + r];
                const double t = ev.hidden(i, r);
                dhid[r] = s * (1.0 - t * t);
                grad[off_b1() + r] += dhid[r];
                double* gw1 = grad.data() + r * in_;
                const Vec& x = xs[i];
                for (std::size_t c2 = 0; c2 < in_; ++c2) gw1[c2] += dhid[r] * x[c2];
            }
        }
        return grad;
    }

    void apply_update(const Vec& grad, double lr) {
        if (opt_ == OptimizerKind::adam)
            adam_step(adam_, params_, grad, lr);
        else
            sgd_step(params_, grad, lr);
    }

    // One optimizer step on the weighted empirical risk.
    void weighted_update(const std::vector<Vec>& xs, const std::vector<int>& ys,
                         const BatchEval& ev, const Vec& weights, double lr) {
        for (double w : weights) require(w >= 0, "weighted_update: weights must be nonnegative");
        apply_update(weighted_loss_grad(xs, ys, ev, weights), lr);
    }

    // L2-normalized hidden activations (representations for weight
    // estimation). A zero activation vector is returned as-is.
    std::vector<Vec> hidden_normalized(const std::vector<Vec>& xs) const {
        std::vector<Vec> reps(xs.size());
        Vec logits_scratch(classes_);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            require(xs[i].size() == in_, "hidden_normalized: input dimension mismatch");
            Vec t(hid_);
            forward_one(xs[i], t.data(), logits_scratch);
            const double n = norm2(t);
            if (n > 0)
                for (auto& v : t) v /= n;
            reps[i] = std::move(t);
        }
        return reps;
    }

private:
    std::size_t off_b1() const { return hid_ * in_; }
    std::size_t off_w2() const { return hid_ * in_ + hid_; }
    std::size_t off_b2() const { return hid_ * in_ + hid_ + classes_ * hid_; }

    void forward_one(const Vec& x, double* t_out, Vec& logits) const {
        for (std::size_t r = 0; r < hid_; ++r) {
            const double* w1r = params_.data() + r * in_;
            double a = params_[off_b1() + r];
            for (std::size_t c = 0; c < in_; ++c) a += w1r[c] * x[c];
            t_out[r] = std::tanh(a);
        }
        for (std::size_t c = 0; c < classes_; ++c) {
            const double* w2c = params_.data() + off_w2() + c * hid_;
            double a = params_[off_b2() + c];
            for (std::size_t r = 0; r < hid_; ++r) a += w2c[r] * t_out[r];
            logits[c] = a;
        }
    }

    static void softmax_inplace(const Vec& logits, double* probs_out) {
        double mx = logits[0];
        for (double v : logits) mx = std::max(mx, v);
        double z = 0.0;
        for (std::size_t c = 0; c < logits.size(); ++c) {
            probs_out[c] = std::exp(logits[c] - mx);
            z += probs_out[c];
        }
        for (std::size_t c = 0; c < logits.size(); ++c) probs_out[c] /= z;
    }

    std::size_t in_, hid_, classes_;
    OptimizerKind opt_;
    Vec params_;
    AdamState adam_;
};

// Loss-value transformation: each sample becomes its one-dimensional loss.
inline std::vector<Vec> transform_loss(const Vec& losses) {
    std::vector<Vec> reps(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) reps[i] = Vec{losses[i]};
    return reps;
}

// Batch positions grouped by class label; groups are disjoint and cover the
// batch.
inline std::vector<std::vector<std::size_t>> partition_by_class(const std::vector<int>& ys,
                                                                int num_classes) {
    require(num_classes >= 1, "partition_by_class: need at least one class");
    std::vector<std::vector<std::size_t>> part(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < ys.size(); ++i) {
        require(ys[i] >= 0 && ys[i] < num_classes, "partition_by_class: label out of range");
        part[static_cast<std::size_t>(ys[i])].push_back(i);
    }
    return part;
}

// Hidden-layer-output transformation: L2-normalized hidden activations in
// batch order plus the per-class index partition.
struct HiddenTransform {
    std::vector<Vec> reps;
    std::vector<std::vector<std::size_t>> by_class;
};

inline HiddenTransform transform_hidden(const Classifier& c, const std::vector<Vec>& xs,
                                        const std::vector<int>& ys) {
    HiddenTransform out;
    out.reps = c.hidden_normalized(xs);
    out.by_class = partition_by_class(ys, static_cast<int>(c.num_classes()));
    return out;
}

}  // namespace driftwt
