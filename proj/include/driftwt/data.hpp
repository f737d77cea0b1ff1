#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "driftwt/numerics.hpp"

namespace driftwt {

struct Sample {
    Vec x;
    int label = 0;
    int clean_label = 0;
    bool is_noisy = false;
};

// Spherical Gaussian class: x | y ~ N(mean, sigma^2 I), P(y) proportional to
// prior.
struct GaussianClassSpec {
    Vec mean;
    double sigma = 1.0;
    double prior = 1.0;
};

struct GaussianMixtureSpec {
    std::vector<GaussianClassSpec> classes;
};

// Labeled train/validation/test splits. Validation and test are drawn from
// the test distribution. When both generating mixtures are known in closed
// form, ratio_oracle(x, y) returns the true density ratio p_te / p_tr.
struct ShiftDataset {
    std::vector<Sample> train, val, test;
    int num_classes = 0;
    std::function<double(const Vec&, int)> ratio_oracle;
    std::vector<int> minority_classes;  // filled by make_class_prior_shift
};

namespace detail {

inline void validate_mixture(const GaussianMixtureSpec& spec) {
    require(spec.classes.size() >= 2, "gaussian mixture: need at least two classes");
    double prior_sum = 0.0;
    const std::size_t d = spec.classes.front().mean.size();
    require(d >= 1, "gaussian mixture: dimension must be at least 1");
    for (const auto& c : spec.classes) {
        require(c.mean.size() == d, "gaussian mixture: inconsistent dimensions");
        require(all_finite(c.mean), "gaussian mixture: non-finite mean");
        require(c.sigma > 0, "gaussian mixture: covariance must be positive definite");
        require(c.prior >= 0, "gaussian mixture: negative prior");
        prior_sum += c.prior;
    }
    require(prior_sum > 0, "gaussian mixture: priors must not all be zero");
}

inline int sample_class(const GaussianMixtureSpec& spec, double prior_sum, Rng& rng) {
    double u = rng.uniform() * prior_sum;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        u -= spec.classes[c].prior;
        if (u < 0) return static_cast<int>(c);
    }
    return static_cast<int>(spec.classes.size()) - 1;
}

inline Sample draw(const GaussianMixtureSpec& spec, double prior_sum, Rng& rng) {
    Sample s;
    s.label = sample_class(spec, prior_sum, rng);
    s.clean_label = s.label;
    const auto& cls = spec.classes[static_cast<std::size_t>(s.label)];
    s.x.resize(cls.mean.size());
    for (std::size_t i = 0; i < s.x.size(); ++i) s.x[i] = cls.mean[i] + cls.sigma * rng.normal();
    return s;
}

inline double log_joint(const GaussianMixtureSpec& spec, double prior_sum, const Vec& x, int y) {
    const auto& cls = spec.classes[static_cast<std::size_t>(y)];
    const double d = static_cast<double>(x.size());
    return std::log(cls.prior / prior_sum) - d * std::log(cls.sigma) -
           sq_dist(x, cls.mean) / (2.0 * cls.sigma * cls.sigma);
}

}  // namespace detail

// Synthetic shifted dataset: train from train_spec, validation and test from
// test_spec, with a closed-form density-ratio oracle. Enforces n_tr >= 10 n_v.
inline ShiftDataset make_gaussian_mixture(const GaussianMixtureSpec& train_spec,
                                          const GaussianMixtureSpec& test_spec, std::size_t n_tr,
                                          std::size_t n_v, std::size_t n_te, std::uint64_t seed) {
    detail::validate_mixture(train_spec);
    detail::validate_mixture(test_spec);
    require(train_spec.classes.size() == test_spec.classes.size(),
            "make_gaussian_mixture: class count mismatch");
    require(n_tr >= 1 && n_v >= 1 && n_te >= 1, "make_gaussian_mixture: empty split");
    require(n_tr >= 10 * n_v, "make_gaussian_mixture: require n_tr >= 10 * n_v");

    double tr_prior_sum = 0.0, te_prior_sum = 0.0;
    for (const auto& c : train_spec.classes) tr_prior_sum += c.prior;
    for (const auto& c : test_spec.classes) te_prior_sum += c.prior;

    ShiftDataset ds;
    ds.num_classes = static_cast<int>(train_spec.classes.size());
    Rng rng(seed);
    ds.train.reserve(n_tr);
    for (std::size_t i = 0; i < n_tr; ++i) ds.train.push_back(detail::draw(train_spec, tr_prior_sum, rng));
    ds.val.reserve(n_v);
    for (std::size_t i = 0; i < n_v; ++i) ds.val.push_back(detail::draw(test_spec, te_prior_sum, rng));
    ds.test.reserve(n_te);
    for (std::size_t i = 0; i < n_te; ++i) ds.test.push_back(detail::draw(test_spec, te_prior_sum, rng));

    ds.ratio_oracle = [train_spec, test_spec, tr_prior_sum, te_prior_sum](const Vec& x, int y) {
        return std::exp(detail::log_joint(test_spec, te_prior_sum, x, y) -
                        detail::log_joint(train_spec, tr_prior_sum, x, y));
    };
    return ds;
}

// Pair flip: each train label moves to its cyclic successor class with the
// given probability. Validation and test stay intact.
inline ShiftDataset inject_pair_flip(const ShiftDataset& ds, double rate, std::uint64_t seed) {
    require(rate >= 0 && rate < 1, "inject_pair_flip: rate must be in [0, 1)");
    require(ds.num_classes >= 2, "inject_pair_flip: need at least two classes");
    ShiftDataset out = ds;
    Rng rng(seed);
    for (Sample& s : out.train) {
        if (rng.uniform() < rate) {
            s.label = (s.label + 1) % ds.num_classes;
            s.is_noisy = true;
        }
    }
    return out;
}

// Symmetric flip: with the given probability the label is replaced by a
// uniform draw over the other classes.
inline ShiftDataset inject_symmetric_flip(const ShiftDataset& ds, double rate,
                                          std::uint64_t seed) {
    require(rate >= 0 && rate < 1, "inject_symmetric_flip: rate must be in [0, 1)");
    require(ds.num_classes >= 2, "inject_symmetric_flip: need at least two classes");
    ShiftDataset out = ds;
    Rng rng(seed);
    for (Sample& s : out.train) {
        if (rng.uniform() < rate) {
            const int offset =
                1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(ds.num_classes - 1)));
            s.label = (s.label + offset) % ds.num_classes;
            s.is_noisy = true;
        }
    }
    return out;
}

// Class-prior shift built from a large balanced pool: ceil(mu * C) randomly
// chosen classes become minority with per-class train count
// ceil(majority / rho). Validation takes n_val_per_class clean samples per
// class from the held-out pool; the base test split is kept (balanced).
inline ShiftDataset make_class_prior_shift(const ShiftDataset& base, double mu, double rho,
                                           std::size_t n_val_per_class, std::uint64_t seed) {
    require(mu > 0 && mu < 1, "make_class_prior_shift: mu must be in (0, 1)");
    require(rho >= 1, "make_class_prior_shift: rho must be at least 1");
    require(n_val_per_class >= 1, "make_class_prior_shift: need validation samples per class");
    const int C = base.num_classes;
    require(C >= 2, "make_class_prior_shift: need at least two classes");

    Rng rng(seed);
    std::vector<std::vector<std::size_t>> pool(static_cast<std::size_t>(C));
    for (std::size_t i = 0; i < base.train.size(); ++i)
        pool[static_cast<std::size_t>(base.train[i].label)].push_back(i);
    for (auto& p : pool) {
        require(p.size() > n_val_per_class, "make_class_prior_shift: insufficient base samples");
        rng.shuffle(p);
    }

    std::size_t majority = base.train.size();
    for (const auto& p : pool) majority = std::min(majority, p.size() - n_val_per_class);
    require(majority >= 1, "make_class_prior_shift: insufficient base samples");
    const std::size_t minority =
        std::max<std::size_t>(1, static_cast<std::size_t>(
                                     std::ceil(static_cast<double>(majority) / rho)));

    std::vector<int> order(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) order[static_cast<std::size_t>(c)] = c;
    rng.shuffle(order);
    const std::size_t n_minority =
        static_cast<std::size_t>(std::ceil(mu * static_cast<double>(C)));
    std::vector<bool> is_minority(static_cast<std::size_t>(C), false);

    ShiftDataset out;
    out.num_classes = C;
    out.test = base.test;
    for (std::size_t k = 0; k < n_minority && k < order.size(); ++k) {
        is_minority[static_cast<std::size_t>(order[k])] = true;
        out.minority_classes.push_back(order[k]);
    }

    for (int c = 0; c < C; ++c) {
        const auto& p = pool[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < n_val_per_class; ++i) out.val.push_back(base.train[p[i]]);
        const std::size_t take = is_minority[static_cast<std::size_t>(c)] ? minority : majority;
        for (std::size_t i = 0; i < take; ++i)
            out.train.push_back(base.train[p[n_val_per_class + i]]);
    }
    rng.shuffle(out.train);

    // Prior-only shift: conditionals are unchanged, so the true ratio is the
    // per-class prior ratio with a balanced test prior.
    Vec train_prior(static_cast<std::size_t>(C), 0.0);
    for (const Sample& s : out.train) train_prior[static_cast<std::size_t>(s.label)] += 1.0;
    for (auto& v : train_prior) v /= static_cast<double>(out.train.size());
    const double test_prior = 1.0 / static_cast<double>(C);
    out.ratio_oracle = [train_prior, test_prior](const Vec&, int y) {
        return test_prior / train_prior[static_cast<std::size_t>(y)];
    };
    return out;
}

// ---- CSV import/export -----------------------------------------------------
// One row per sample: split,x0,...,x{d-1},label,clean_label,is_noisy

inline void write_dataset_csv(std::ostream& os, const ShiftDataset& ds) {
    require(!ds.train.empty(), "write_dataset_csv: empty dataset");
    const std::size_t d = ds.train.front().x.size();
    os << "split";
    for (std::size_t i = 0; i < d; ++i) os << ",x" << i;
    os << ",label,clean_label,is_noisy\n";
    char buf[40];
    auto emit = [&](const char* split, const std::vector<Sample>& samples) {
        for (const Sample& s : samples) {
            os << split;
            for (double v : s.x) {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                os << ',' << buf;
            }
            os << ',' << s.label << ',' << s.clean_label << ',' << (s.is_noisy ? 1 : 0) << '\n';
        }
    };
    emit("train", ds.train);
    emit("val", ds.val);
    emit("test", ds.test);
}

inline ShiftDataset read_dataset_csv(std::istream& is) {
    ShiftDataset ds;
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), "read_dataset_csv: missing header");
    int max_label = -1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        require(static_cast<bool>(std::getline(ss, field, ',')), "read_dataset_csv: bad row");
        const std::string split = field;
        std::vector<std::string> rest;
        while (std::getline(ss, field, ',')) rest.push_back(field);
        require(rest.size() >= 4, "read_dataset_csv: bad row");
        Sample s;
        for (std::size_t i = 0; i + 3 < rest.size(); ++i) s.x.push_back(std::stod(rest[i]));
        s.label = std::stoi(rest[rest.size() - 3]);
        s.clean_label = std::stoi(rest[rest.size() - 2]);
        s.is_noisy = rest[rest.size() - 1] == "1";
        max_label = std::max(max_label, std::max(s.label, s.clean_label));
        if (split == "train")
            ds.train.push_back(std::move(s));
        else if (split == "val")
            ds.val.push_back(std::move(s));
        else if (split == "test")
            ds.test.push_back(std::move(s));
        else
            throw contract_error("read_dataset_csv: unknown split '" + split + "'");
    }
    ds.num_classes = max_label + 1;
    return ds;
}

}  // namespace driftwt
