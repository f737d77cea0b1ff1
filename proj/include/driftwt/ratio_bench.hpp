#pragma once

#include <iostream>

#include "driftwt/critic.hpp"
#include "driftwt/metrics.hpp"
#include "driftwt/objectives.hpp"
#include "driftwt/pgd.hpp"

namespace driftwt {

// Weight-estimation-only benchmark on a 1-D Gaussian covariate shift with a
// known density ratio: train from N(0, 1), validation from N(shift, 1), so
// the true ratio is exp(shift * x - shift^2 / 2). Every estimator runs on the
// raw inputs (identity transformation) to convergence and is scored by
// scale-normalized NMSE against the analytic ratio.
struct RatioBenchConfig {
    std::size_t n_train = 2000;
    std::size_t n_val = 200;
    double shift = 1.0;
    std::uint64_t seed = 7;
    double epsilon = 0.1;
    double lambda = 1e-5;
    double sigma = 0.0;  // <= 0: median heuristic

    double kmm_tol = 1e-8;
    long long kmm_max_iter = 20000;
    double kliep_eta = 0.5;
    double kliep_tol = 1e-10;
    long long kliep_max_iter = 100000;
    double lsif_tol = 1e-10;
    long long lsif_max_iter = 100000;

    int w1_rounds = 1200;
    double w1_eta = 20.0;
    double w1_critic_lr = 2e-3;
    int w1_critic_updates = 3;
    int w1_warm_rounds = 50;
    double w1_kappa = 10.0;
    std::size_t w1_hidden = 16;
    int w1_seeds = 3;
};

struct RatioBenchRow {
    std::string estimator;
    double nmse = 0.0;
};

namespace detail {

struct RatioInstance {
    std::vector<Vec> z_tr, z_val;
    Vec oracle;  // true ratio at the train points
};

inline RatioInstance make_ratio_instance(const RatioBenchConfig& cfg, std::uint64_t seed) {
    RatioInstance inst;
    Rng rng(seed);
    inst.z_tr.reserve(cfg.n_train);
    inst.oracle.reserve(cfg.n_train);
    for (std::size_t i = 0; i < cfg.n_train; ++i) {
        const double x = rng.normal();
        inst.z_tr.push_back(Vec{x});
        inst.oracle.push_back(std::exp(cfg.shift * x - 0.5 * cfg.shift * cfg.shift));
    }
    inst.z_val.reserve(cfg.n_val);
    for (std::size_t i = 0; i < cfg.n_val; ++i)
        inst.z_val.push_back(Vec{cfg.shift + rng.normal()});
    return inst;
}

inline double bench_sigma(const RatioBenchConfig& cfg, const RatioInstance& inst) {
    if (cfg.sigma > 0) return cfg.sigma;
    std::vector<Vec> pooled = inst.z_tr;
    pooled.insert(pooled.end(), inst.z_val.begin(), inst.z_val.end());
    return median_pairwise_distance(pooled);
}

// Alternating critic/weight optimization for the Wasserstein-1 estimator:
// each round refreshes the critic against the current weights, then takes one
// projected weight step with a diminishing step size.
inline Vec w1_solve(const RatioBenchConfig& cfg, const RatioInstance& inst, std::uint64_t seed) {
    Rng init_rng(Rng::mix(seed, 0x3A1));
    Critic critic(1, cfg.w1_hidden, cfg.w1_kappa, init_rng);
    Rng plan_rng(Rng::mix(seed, 0x3A2));
    Vec w(inst.z_tr.size(), 1.0);
    for (int round = 1; round <= cfg.w1_rounds; ++round) {
        const bool penalty = round > cfg.w1_warm_rounds;
        for (int u = 0; u < cfg.w1_critic_updates; ++u)
            critic.train_step(inst.z_tr, w, inst.z_val, cfg.w1_critic_lr, plan_rng, penalty);
        const Objective obj =
            w1_build(critic.values(inst.z_tr), critic.values(inst.z_val), cfg.epsilon);
        PgdConfig pc;
        pc.steps = 1;
        pc.eta = cfg.w1_eta / std::sqrt(static_cast<double>(round));
        w = run(obj, project(obj.constraint, w), pc).point;
    }
    return w;
}

}  // namespace detail

inline std::vector<RatioBenchRow> run_ratio_bench(const RatioBenchConfig& cfg) {
    const detail::RatioInstance inst = detail::make_ratio_instance(cfg, cfg.seed);
    const RbfKernel kern{detail::bench_sigma(cfg, inst)};
    std::vector<RatioBenchRow> rows;

    {
        const Objective obj = kmm_build(kern, inst.z_tr, inst.z_val, cfg.epsilon);
        PgdConfig pc;
        pc.to_convergence = true;
        pc.tol = cfg.kmm_tol;
        pc.max_iter = cfg.kmm_max_iter;
        const Vec w = run(obj, Vec(inst.z_tr.size(), 1.0), pc).point;
        rows.push_back({"kmm", we_nmse(w, inst.oracle)});
    }
    {
        const BasisSet basis{inst.z_val};
        const Objective obj = kliep_build(basis, kern, inst.z_tr, inst.z_val);
        PgdConfig pc;
        pc.to_convergence = true;
        pc.eta = cfg.kliep_eta;
        pc.tol = cfg.kliep_tol;
        pc.max_iter = cfg.kliep_max_iter;
        const Vec beta = run(obj, project(obj.constraint, Vec(obj.dim, 1.0)), pc).point;
        rows.push_back({"kliep", we_nmse(weights_from_params(obj, beta, inst.z_tr), inst.oracle)});
    }
    {
        const BasisSet basis{inst.z_val};
        const Objective obj = lsif_build(basis, kern, inst.z_tr, inst.z_val, cfg.lambda);
        PgdConfig pc;
        pc.to_convergence = true;
        pc.tol = cfg.lsif_tol;
        pc.max_iter = cfg.lsif_max_iter;
        const Vec beta = run(obj, project(obj.constraint, Vec(obj.dim, 1.0)), pc).point;
        rows.push_back({"lsif", we_nmse(weights_from_params(obj, beta, inst.z_tr), inst.oracle)});
    }
    {
        double acc = 0.0;
        for (int s = 0; s < cfg.w1_seeds; ++s) {
            const Vec w = detail::w1_solve(cfg, inst, Rng::mix(cfg.seed, 0x88 + static_cast<std::uint64_t>(s)));
            acc += we_nmse(w, inst.oracle);
        }
        rows.push_back({"w1", acc / static_cast<double>(cfg.w1_seeds)});
    }
    return rows;
}

inline void print_ratio_bench(const std::vector<RatioBenchRow>& rows, std::ostream& os) {
    os << "estimator  nmse\n";
    for (const auto& r : rows) {
        os << r.estimator;
        for (std::size_t i = r.estimator.size(); i < 11; ++i) os << ' ';
        os << r.nmse << "\n";
    }
}

}  // namespace driftwt
