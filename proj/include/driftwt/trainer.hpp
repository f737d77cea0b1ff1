#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <map>
#include <memory>
#include <optional>
#include <thread>

#include "driftwt/critic.hpp"
#include "driftwt/data.hpp"
#include "driftwt/metrics.hpp"
#include "driftwt/model.hpp"
#include "driftwt/objectives.hpp"
#include "driftwt/pgd.hpp"
#include "driftwt/weights.hpp"

namespace driftwt {

enum class Estimator { kmm, kliep, lsif, w1 };
enum class Transform { loss_value, hidden_layer };
enum class Baseline { none, uniform, random, val_only, diw };
enum class LrSchedule { constant, inv_sqrt_total, inv_sqrt_epoch };

// Per-class test-to-train prior ratio r_y, estimated from label counts with
// +1 Laplace smoothing on each count.
struct ClassPriorRatio {
    std::vector<double> r;
};

inline ClassPriorRatio estimate_class_prior_ratio(const std::vector<int>& train_labels,
                                                  const std::vector<int>& val_labels,
                                                  int num_classes) {
    require(num_classes >= 1, "estimate_class_prior_ratio: need at least one class");
    require(!train_labels.empty() && !val_labels.empty(),
            "estimate_class_prior_ratio: empty label lists");
    std::vector<std::size_t> ct(static_cast<std::size_t>(num_classes), 0);
    std::vector<std::size_t> cv(static_cast<std::size_t>(num_classes), 0);
    for (int y : train_labels) {
        require(y >= 0 && y < num_classes, "estimate_class_prior_ratio: train label out of range");
        ++ct[static_cast<std::size_t>(y)];
    }
    for (int y : val_labels) {
        require(y >= 0 && y < num_classes, "estimate_class_prior_ratio: val label out of range");
        require(ct[static_cast<std::size_t>(y)] > 0,
                "estimate_class_prior_ratio: validation class missing from training data");
        ++cv[static_cast<std::size_t>(y)];
    }
    ClassPriorRatio out;
    out.r.resize(static_cast<std::size_t>(num_classes));
    const double n_tr = static_cast<double>(train_labels.size());
    const double n_v = static_cast<double>(val_labels.size());
    for (std::size_t y = 0; y < out.r.size(); ++y) {
        const double pv = (static_cast<double>(cv[y]) + 1.0) / n_v;
        const double pt = (static_cast<double>(ct[y]) + 1.0) / n_tr;
        out.r[y] = pv / pt;
    }
    return out;
}

// Weight-estimation settings. eta <= 0 selects the built-in default for the
// chosen estimator (power-iteration 1/L for the quadratic objectives, fixed
// literature values for KLIEP and the Wasserstein critic).
struct WeConfig {
    int steps = 1;                 // PGD steps per mini-batch
    double eta = 0.0;
    double epsilon = 0.1;          // mean-band slack (KMM / W1)
    double sigma = 0.0;            // kernel width; <= 0 uses the median heuristic
    double lambda = 1e-5;          // LSIF regularization
    double kappa = 10.0;           // gradient-penalty coefficient
    double critic_lr = 1e-4;
    int critic_warm_batches = 50;  // penalty disabled for this many mini-batches
    int critic_updates = 3;        // critic steps per mini-batch
    std::size_t critic_hidden = 16;
    bool w2_clamp = false;         // bound WE steps by the outer gradient energy
};

struct TrainConfig {
    Estimator estimator = Estimator::kmm;
    Transform transform = Transform::loss_value;
    Baseline baseline = Baseline::none;
    int epochs = 50;
    std::size_t batch_size = 64;
    double lr = 0.1;
    LrSchedule lr_schedule = LrSchedule::constant;
    OptimizerKind optimizer = OptimizerKind::sgd;
    std::size_t hidden_dim = 32;
    WeConfig we;
    std::uint64_t seed = 1;
    int weight_snapshot_stride = 0;  // 0: final snapshot only
    WindowPolicy profile;            // default records every iteration
    int we_threads = 0;              // 0: DRIFTWT_THREADS or 1
};

struct EpochMetrics {
    int epoch = 0;
    double test_top1 = 0.0;
    double test_topk = 0.0;
    double val_top1 = 0.0;
    double weighted_risk_mean = 0.0;
    double batch_grad_sq_mean = 0.0;
    double full_grad_norm_sq = 0.0;
    double weight_mean = 0.0;
    double weight_cv = 0.0;
    double weight_mean_clean = 0.0;
    double weight_mean_noisy = 0.0;
    std::vector<double> weight_mean_by_class;
    int skipped_batches = 0;
    double epoch_seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochMetrics> epochs;
    Vec final_weights;
    std::vector<bool> train_noisy_flags;
    std::vector<int> train_labels;
    std::vector<std::pair<int, Vec>> weight_snapshots;
    std::vector<StageRow> stages;
    double we_stage_seconds = 0.0;
    std::size_t batches_total = 0;
    int skipped_batches_total = 0;
    int num_classes = 0;

    // Mean test accuracy over the last `window` epochs.
    double final_window_acc(int window = 10) const {
        require(!epochs.empty(), "final_window_acc: no epochs");
        const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(window), epochs.size());
        double s = 0.0;
        for (std::size_t i = epochs.size() - w; i < epochs.size(); ++i) s += epochs[i].test_top1;
        return s / static_cast<double>(w);
    }
};

// Instrumentation callbacks. `start` carries the gathered values before any
// projection, `result` the values written back.
struct WeEvent {
    int epoch = 0;
    long long batch = 0;
    bool parametric = false;
    const std::vector<std::size_t>* indices = nullptr;
    const Vec* start = nullptr;
    const Vec* result = nullptr;
};

struct WcEvent {
    double risk = 0.0;
    const Vec* weights = nullptr;
    const Vec* losses = nullptr;
};

struct TrainHooks {
    std::function<void(const WeEvent&)> on_we;
    std::function<void(const WcEvent&)> on_wc;
};

namespace detail {

inline int resolve_we_threads(int configured) {
    if (configured > 0) return configured;
    if (const char* env = std::getenv("DRIFTWT_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

class Trainer {
public:
    Trainer(const ShiftDataset& data, const TrainConfig& cfg, const TrainHooks* hooks)
        : data_(data), cfg_(cfg), hooks_(hooks), timer_(cfg.profile) {
        require(!data.val.empty(), "train: validation split must be nonempty");
        require(!data.train.empty() && !data.test.empty(), "train: empty split");
        require(cfg.epochs >= 1, "train: epochs must be at least 1");
        require(cfg.batch_size >= 1 && cfg.batch_size <= data.train.size(),
                "train: batch size must be in [1, n_tr]");
        if (cfg_.baseline == Baseline::diw) cfg_.estimator = Estimator::kmm;
        pool_ = (cfg_.baseline == Baseline::val_only) ? &data.val : &data.train;
        n_ = pool_->size();
        batch_ = std::min(cfg_.batch_size, n_);
        val_batch_ = std::min(cfg_.batch_size, data.val.size());
        we_threads_ = resolve_we_threads(cfg_.we_threads);
    }

    TrainReport run() {
        const std::size_t d = pool_->front().x.size();
        const int C = data_.num_classes;
        Rng model_rng(Rng::mix(cfg_.seed, 0x1001));
        model_ = std::make_unique<Classifier>(d, cfg_.hidden_dim, static_cast<std::size_t>(C),
                                              cfg_.optimizer, model_rng);
        store_ = std::make_unique<WeightStore>(n_);
        beta_store_.assign(data_.val.size(), 1.0);
        loader_rng_ = std::make_unique<Rng>(Rng::mix(cfg_.seed, 0x1002));
        random_rng_ = std::make_unique<Rng>(Rng::mix(cfg_.seed, 0x1003));

        if (cfg_.transform == Transform::hidden_layer) {
            std::vector<int> tl, vl;
            for (const Sample& s : *pool_) tl.push_back(s.label);
            for (const Sample& s : data_.val) vl.push_back(s.label);
            prior_ = estimate_class_prior_ratio(tl, vl, C);
        }

        val_queue_.resize(data_.val.size());
        for (std::size_t i = 0; i < val_queue_.size(); ++i) val_queue_[i] = i;
        loader_rng_->shuffle(val_queue_);
        val_pos_ = 0;

        TrainReport report;
        report.num_classes = C;
        for (const Sample& s : *pool_) {
            report.train_noisy_flags.push_back(s.is_noisy);
            report.train_labels.push_back(s.label);
        }

        std::vector<std::size_t> order(n_);
        for (std::size_t i = 0; i < n_; ++i) order[i] = i;

        for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
            const auto epoch_tic = std::chrono::steady_clock::now();
            const double alpha = learning_rate(epoch);
            timer_.new_window();
            loader_rng_->shuffle(order);
            if (cfg_.baseline == Baseline::random) draw_random_weights();

            EpochMetrics em;
            em.epoch = epoch;
            double risk_sum = 0.0, grad_sq_sum = 0.0;
            std::size_t wc_batches = 0;

            for (std::size_t off = 0; off < n_; off += batch_) {
                const std::size_t bn = std::min(batch_, n_ - off);
                std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(off),
                                             order.begin() + static_cast<std::ptrdiff_t>(off + bn));
                ++report.batches_total;
                const long long batch_no = global_batch_++;

                timer_.start(Stage::fetch_tr_data);
                std::vector<Vec> xs(bn);
                std::vector<int> ys(bn);
                for (std::size_t i = 0; i < bn; ++i) {
                    xs[i] = (*pool_)[idx[i]].x;
                    ys[i] = (*pool_)[idx[i]].label;
                }
                timer_.stop(Stage::fetch_tr_data);

                timer_.start(Stage::fetch_val_data);
                std::vector<std::size_t> vidx = next_val_batch();
                std::vector<Vec> vxs(vidx.size());
                std::vector<int> vys(vidx.size());
                for (std::size_t i = 0; i < vidx.size(); ++i) {
                    vxs[i] = data_.val[vidx[i]].x;
                    vys[i] = data_.val[vidx[i]].label;
                }
                timer_.stop(Stage::fetch_val_data);

                timer_.start(Stage::forward_tr);
                Classifier::BatchEval ev_tr = model_->forward_loss(xs, ys);
                timer_.stop(Stage::forward_tr);

                timer_.start(Stage::forward_val);
                Classifier::BatchEval ev_val = model_->forward_loss(vxs, vys);
                timer_.stop(Stage::forward_val);

                timer_.start(Stage::get_tr_loss);
                Vec l_tr = ev_tr.losses;
                timer_.stop(Stage::get_tr_loss);

                timer_.start(Stage::get_val_loss);
                Vec l_val = ev_val.losses;
                timer_.stop(Stage::get_val_loss);

                Vec w_batch;
                bool skipped = false;
                {
                    StageTimer::Scoped scope(timer_, Stage::estimate_weights);
                    try {
                        w_batch = estimate_weights(epoch, batch_no, idx, vidx, xs, ys, vxs, vys,
                                                   l_tr, l_val, ev_tr, alpha);
                    } catch (const step_failure&) {
                        skipped = true;
                    }
                }
                if (skipped) {
                    ++em.skipped_batches;
                    ++report.skipped_batches_total;
                    timer_.end_iteration();
                    continue;
                }

                timer_.start(Stage::weight_tr_loss);
                const double risk = dot(w_batch, l_tr) / static_cast<double>(bn);
                timer_.stop(Stage::weight_tr_loss);
                if (hooks_ && hooks_->on_wc) {
                    WcEvent e{risk, &w_batch, &l_tr};
                    hooks_->on_wc(e);
                }

                timer_.start(Stage::backward);
                Vec grad = model_->weighted_loss_grad(xs, ys, ev_tr, w_batch);
                timer_.stop(Stage::backward);

                timer_.start(Stage::update_model);
                model_->apply_update(grad, alpha);
                timer_.stop(Stage::update_model);

                risk_sum += risk;
                grad_sq_sum += dot(grad, grad);
                ++wc_batches;
                timer_.end_iteration();
            }

            // Epoch bookkeeping (outside the staged loop).
            const AccuracyResult te = accuracy(*model_, data_.test, std::min(5, C));
            em.test_top1 = te.top1;
            em.test_topk = te.topk;
            em.val_top1 = accuracy(*model_, data_.val, 1).top1;
            em.weighted_risk_mean = wc_batches ? risk_sum / static_cast<double>(wc_batches) : 0.0;
            em.batch_grad_sq_mean = wc_batches ? grad_sq_sum / static_cast<double>(wc_batches) : 0.0;
            em.full_grad_norm_sq = full_weighted_grad_norm_sq();
            fill_weight_stats(em);
            em.epoch_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_tic).count();
            report.epochs.push_back(std::move(em));

            if (cfg_.weight_snapshot_stride > 0 && epoch % cfg_.weight_snapshot_stride == 0)
                report.weight_snapshots.emplace_back(epoch, store_->values());
        }

        report.final_weights = store_->values();
        if (timer_.windows() >= 1) report.stages = stage_report(timer_);
        report.we_stage_seconds = timer_.total_seconds(Stage::estimate_weights);
        return report;
    }

private:
    double learning_rate(int epoch) const {
        switch (cfg_.lr_schedule) {
            case LrSchedule::inv_sqrt_total:
                return cfg_.lr / std::sqrt(static_cast<double>(cfg_.epochs));
            case LrSchedule::inv_sqrt_epoch:
                return cfg_.lr / std::sqrt(static_cast<double>(epoch));
            default:
                return cfg_.lr;
        }
    }

    std::vector<std::size_t> next_val_batch() {
        if (val_pos_ >= val_queue_.size()) {
            loader_rng_->shuffle(val_queue_);
            val_pos_ = 0;
        }
        const std::size_t take = std::min(val_batch_, val_queue_.size() - val_pos_);
        std::vector<std::size_t> out(val_queue_.begin() + static_cast<std::ptrdiff_t>(val_pos_),
                                     val_queue_.begin() + static_cast<std::ptrdiff_t>(val_pos_ + take));
        val_pos_ += take;
        return out;
    }

    void draw_random_weights() {
        std::vector<std::size_t> all(n_);
        Vec w(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            all[i] = i;
            w[i] = std::max(0.0, random_rng_->normal());
        }
        store_->scatter(all, w);
    }

    double resolved_eta() const {
        if (cfg_.we.eta > 0) return cfg_.we.eta;
        switch (cfg_.estimator) {
            case Estimator::kliep: return 0.5;
            case Estimator::w1: return 0.01;
            default: return 0.0;  // quadratic objectives: PGD picks 1/L
        }
    }

    double resolve_sigma(const std::vector<Vec>& z_tr, const std::vector<Vec>& z_val) const {
        if (cfg_.we.sigma > 0) return cfg_.we.sigma;
        std::vector<Vec> pooled = z_tr;
        pooled.insert(pooled.end(), z_val.begin(), z_val.end());
        double sigma = median_pairwise_distance(pooled);
        if (cfg_.estimator == Estimator::kliep) {
            // The log objective is unbounded below when a validation center
            // carries no training mass, so the automatic width is floored at
            // a quarter of the worst center-to-train distance, keeping every
            // basis mean above exp(-8).
            double worst = 0.0;
            for (const Vec& c : z_val) {
                double best = std::numeric_limits<double>::infinity();
                for (const Vec& t : z_tr) best = std::min(best, sq_dist(c, t));
                worst = std::max(worst, best);
            }
            sigma = std::max(sigma, 0.25 * std::sqrt(worst));
        }
        return sigma;
    }

    PgdConfig make_pgd_config(std::optional<double> clamp) const {
        PgdConfig pc;
        pc.steps = cfg_.we.steps;
        pc.eta = resolved_eta();
        pc.w2_clamp = clamp;
        if (cfg_.baseline == Baseline::diw) {
            pc.to_convergence = true;
            pc.tol = 1e-8;
            pc.max_iter = 10000;
        }
        return pc;
    }

    Critic& critic_for(int key, std::size_t input_dim) {
        auto it = critics_.find(key);
        if (it == critics_.end()) {
            Rng rng(Rng::mix(cfg_.seed, 0xC517 + static_cast<std::uint64_t>(key + 1)));
            it = critics_
                     .emplace(key, Critic(input_dim, cfg_.we.critic_hidden, cfg_.we.kappa, rng))
                     .first;
            critic_batches_[key] = 0;
        }
        return it->second;
    }

    struct WeOut {
        Vec weights;  // scaled, local order of the supplied train indices
        Vec beta;     // parametric only
        Vec start;    // gathered state before projection
    };

    // One weight-estimation solve on prepared representations. Reads the
    // stores but leaves all writes to the caller.
    WeOut estimate_on(const std::vector<Vec>& z_tr, const std::vector<Vec>& z_val,
                      const std::vector<std::size_t>& tr_global,
                      const std::vector<std::size_t>& val_global, long long batch_no,
                      int critic_key, double scale, std::optional<double> clamp) {
        WeOut out;
        const PgdConfig pc = make_pgd_config(clamp);
        switch (cfg_.estimator) {
            case Estimator::kmm: {
                const RbfKernel kern{resolve_sigma(z_tr, z_val)};
                const Objective obj = kmm_build(kern, z_tr, z_val, cfg_.we.epsilon);
                out.start = store_->gather(tr_global);
                Vec x0 = (cfg_.baseline == Baseline::diw) ? Vec(z_tr.size(), 1.0)
                                                          : project(obj.constraint, out.start);
                out.weights = scaled(driftwt::run(obj, x0, pc).point, scale);
                break;
            }
            case Estimator::kliep:
            case Estimator::lsif: {
                const RbfKernel kern{resolve_sigma(z_tr, z_val)};
                const BasisSet basis{z_val};
                if (cfg_.estimator == Estimator::kliep) {
                    // A basis whose mean train features underflow cannot carry
                    // the sum constraint in double precision; skip the batch.
                    const Vec abar = mean_features(basis, kern, z_tr);
                    double amax = 0.0;
                    for (double v : abar) amax = std::max(amax, v);
                    if (amax < 1e-150)
                        throw step_failure("we: degenerate basis for this batch", Vec{});
                }
                const Objective obj =
                    (cfg_.estimator == Estimator::kliep)
                        ? kliep_build(basis, kern, z_tr, z_val)
                        : lsif_build(basis, kern, z_tr, z_val, cfg_.we.lambda);
                out.start.resize(val_global.size());
                for (std::size_t i = 0; i < val_global.size(); ++i)
                    out.start[i] = beta_store_[val_global[i]];
                Vec x0 = project(obj.constraint, out.start);
                if (!is_feasible(obj.constraint, x0, 1e-6))
                    throw step_failure("we: start projection lost feasibility", x0);
                out.beta = driftwt::run(obj, x0, pc).point;
                out.weights = scaled(weights_from_params(obj, out.beta, z_tr), scale);
                break;
            }
            case Estimator::w1: {
                Critic& critic = critic_for(critic_key, z_tr.front().size());
                out.start = store_->gather(tr_global);
                const Vec w0 = project(NonnegMeanBand{cfg_.we.epsilon}, out.start);
                Rng crng(Rng::mix(Rng::mix(cfg_.seed, 0xC4A0),
                                  static_cast<std::uint64_t>(batch_no) * 131ull +
                                      static_cast<std::uint64_t>(critic_key + 1)));
                const bool penalty = critic_batches_[critic_key] >= cfg_.we.critic_warm_batches;
                for (int u = 0; u < cfg_.we.critic_updates; ++u)
                    critic.train_step(z_tr, w0, z_val, cfg_.we.critic_lr, crng, penalty);
                ++critic_batches_[critic_key];
                const Objective obj =
                    w1_build(critic.values(z_tr), critic.values(z_val), cfg_.we.epsilon);
                out.weights = scaled(driftwt::run(obj, w0, pc).point, scale);
                break;
            }
        }
        // A solve that ran off to an absurd scale must not poison the stores.
        for (double v : out.weights)
            if (!(v <= 1e12)) throw step_failure("we: result out of sane range", out.weights);
        for (double v : out.beta)
            if (!(v <= 1e12)) throw step_failure("we: result out of sane range", out.beta);
        return out;
    }

    // Per-batch weight estimation. Returns the batch-ordered weights used for
    // the weighted classification step and writes updated state back to the
    // stores. Throws step_failure when the batch must be skipped.
    Vec estimate_weights(int epoch, long long batch_no, const std::vector<std::size_t>& idx,
                         const std::vector<std::size_t>& vidx, const std::vector<Vec>& xs,
                         const std::vector<int>& ys, const std::vector<Vec>& vxs,
                         const std::vector<int>& vys, const Vec& l_tr, const Vec& l_val,
                         const Classifier::BatchEval& ev_tr, double alpha) {
        if (cfg_.baseline == Baseline::uniform || cfg_.baseline == Baseline::val_only ||
            cfg_.baseline == Baseline::random)
            return store_->gather(idx);

        std::optional<double> clamp;
        if (cfg_.we.w2_clamp) {
            const Vec w_pre = store_->gather(idx);
            const Vec g_pre = model_->weighted_loss_grad(xs, ys, ev_tr, w_pre);
            clamp = alpha * alpha * dot(g_pre, g_pre);
        }

        if (cfg_.transform == Transform::loss_value) {
            const std::vector<Vec> z_tr = transform_loss(l_tr);
            const std::vector<Vec> z_val = transform_loss(l_val);
            WeOut we = estimate_on(z_tr, z_val, idx, vidx, batch_no, -1, 1.0, clamp);
            commit(epoch, batch_no, idx, vidx, we);
            return we.weights;
        }
        return estimate_hidden(epoch, batch_no, idx, vidx, xs, ys, vxs, vys, clamp);
    }

    void commit(int epoch, long long batch_no, const std::vector<std::size_t>& idx,
                const std::vector<std::size_t>& vidx, const WeOut& we) {
        const bool parametric =
            cfg_.estimator == Estimator::kliep || cfg_.estimator == Estimator::lsif;
        store_->scatter(idx, we.weights);
        if (parametric)
            for (std::size_t i = 0; i < vidx.size(); ++i) beta_store_[vidx[i]] = we.beta[i];
        if (hooks_ && hooks_->on_we) {
            WeEvent e;
            e.epoch = epoch;
            e.batch = batch_no;
            e.parametric = parametric;
            e.indices = parametric ? &vidx : &idx;
            e.start = &we.start;
            e.result = parametric ? &we.beta : &we.weights;
            hooks_->on_we(e);
        }
    }

    // Hidden-layer transformation: class-partitioned weight estimation with
    // prior-ratio scaling. Classes with fewer than two train or two val
    // members keep their current weights; when every class is skipped the
    // batch weights fall back to zero without touching the store.
    Vec estimate_hidden(int epoch, long long batch_no, const std::vector<std::size_t>& idx,
                        const std::vector<std::size_t>& vidx, const std::vector<Vec>& xs,
                        const std::vector<int>& ys, const std::vector<Vec>& vxs,
                        const std::vector<int>& vys, std::optional<double> clamp) {
        const HiddenTransform htr = transform_hidden(*model_, xs, ys);
        const HiddenTransform hval = transform_hidden(*model_, vxs, vys);
        const int C = data_.num_classes;

        struct Task {
            int y = 0;
            std::vector<Vec> z_tr, z_val;
            std::vector<std::size_t> tr_global, val_global;
            std::vector<std::size_t> tr_local;
            WeOut out;
            std::exception_ptr error;
        };
        std::vector<Task> tasks;
        for (int y = 0; y < C; ++y) {
            const auto& tl = htr.by_class[static_cast<std::size_t>(y)];
            const auto& vl = hval.by_class[static_cast<std::size_t>(y)];
            if (tl.size() < 2 || vl.size() < 2) continue;
            Task t;
            t.y = y;
            for (std::size_t i : tl) {
                t.z_tr.push_back(htr.reps[i]);
                t.tr_global.push_back(idx[i]);
                t.tr_local.push_back(i);
            }
            for (std::size_t j : vl) {
                t.z_val.push_back(hval.reps[j]);
                t.val_global.push_back(vidx[j]);
            }
            tasks.push_back(std::move(t));
        }

        if (tasks.empty()) return Vec(idx.size(), 0.0);  // all classes skipped

        if (cfg_.estimator == Estimator::w1)
            for (const Task& t : tasks) critic_for(t.y, cfg_.hidden_dim);

        auto run_task = [&](Task& t) {
            try {
                t.out = estimate_on(t.z_tr, t.z_val, t.tr_global, t.val_global, batch_no, t.y,
                                    prior_->r[static_cast<std::size_t>(t.y)], clamp);
            } catch (...) {
                t.error = std::current_exception();
            }
        };

        const int threads = std::min<int>(we_threads_, static_cast<int>(tasks.size()));
        if (threads <= 1) {
            for (Task& t : tasks) run_task(t);
        } else {
            std::vector<std::thread> pool;
            std::atomic<std::size_t> next{0};
            for (int w = 0; w < threads; ++w)
                pool.emplace_back([&] {
                    for (std::size_t i = next.fetch_add(1); i < tasks.size();
                         i = next.fetch_add(1))
                        run_task(tasks[i]);
                });
            for (auto& th : pool) th.join();
        }
        for (const Task& t : tasks)
            if (t.error) std::rethrow_exception(t.error);

        // All classes succeeded: write back and reconcile to batch order.
        Vec w_batch = store_->gather(idx);  // skipped classes retain current weights
        for (Task& t : tasks) {
            commit(epoch, batch_no, t.tr_global, t.val_global, t.out);
            for (std::size_t i = 0; i < t.tr_local.size(); ++i)
                w_batch[t.tr_local[i]] = t.out.weights[i];
        }
        return w_batch;
    }

    // || grad_theta of (1/n) sum_i w_i loss_i ||^2 over the whole training
    // pool with the currently stored weights.
    double full_weighted_grad_norm_sq() {
        const std::size_t chunk = 512;
        Vec total(model_->params().size(), 0.0);
        const double n_total = static_cast<double>(n_);
        for (std::size_t off = 0; off < n_; off += chunk) {
            const std::size_t bn = std::min(chunk, n_ - off);
            std::vector<Vec> xs(bn);
            std::vector<int> ys(bn);
            Vec w(bn);
            for (std::size_t i = 0; i < bn; ++i) {
                xs[i] = (*pool_)[off + i].x;
                ys[i] = (*pool_)[off + i].label;
                w[i] = store_->values()[off + i];
            }
            const Classifier::BatchEval ev = model_->forward_loss(xs, ys);
            const Vec g = model_->weighted_loss_grad(xs, ys, ev, w);
            const double f = static_cast<double>(bn) / n_total;
            for (std::size_t i = 0; i < total.size(); ++i) total[i] += f * g[i];
        }
        return dot(total, total);
    }

    void fill_weight_stats(EpochMetrics& em) const {
        const Vec& w = store_->values();
        em.weight_mean = mean(w);
        double var = 0.0;
        for (double v : w) var += (v - em.weight_mean) * (v - em.weight_mean);
        var /= static_cast<double>(w.size());
        em.weight_cv = em.weight_mean != 0.0 ? std::sqrt(var) / em.weight_mean : 0.0;

        double cs = 0.0, ns = 0.0;
        std::size_t cn = 0, nn = 0;
        em.weight_mean_by_class.assign(static_cast<std::size_t>(data_.num_classes), 0.0);
        std::vector<std::size_t> class_n(static_cast<std::size_t>(data_.num_classes), 0);
        for (std::size_t i = 0; i < n_; ++i) {
            const Sample& s = (*pool_)[i];
            if (s.is_noisy) {
                ns += w[i];
                ++nn;
            } else {
                cs += w[i];
                ++cn;
            }
            em.weight_mean_by_class[static_cast<std::size_t>(s.label)] += w[i];
            ++class_n[static_cast<std::size_t>(s.label)];
        }
        em.weight_mean_clean = cn ? cs / static_cast<double>(cn) : 0.0;
        em.weight_mean_noisy = nn ? ns / static_cast<double>(nn) : 0.0;
        for (std::size_t c = 0; c < em.weight_mean_by_class.size(); ++c)
            if (class_n[c]) em.weight_mean_by_class[c] /= static_cast<double>(class_n[c]);
    }

    const ShiftDataset& data_;
    TrainConfig cfg_;
    const TrainHooks* hooks_;
    StageTimer timer_;
    const std::vector<Sample>* pool_ = nullptr;
    std::size_t n_ = 0, batch_ = 0, val_batch_ = 0;
    int we_threads_ = 1;
    long long global_batch_ = 0;

    std::unique_ptr<Classifier> model_;
    std::unique_ptr<WeightStore> store_;
    Vec beta_store_;
    std::unique_ptr<Rng> loader_rng_, random_rng_;
    std::optional<ClassPriorRatio> prior_;
    std::map<int, Critic> critics_;
    std::map<int, int> critic_batches_;
    std::vector<std::size_t> val_queue_;
    std::size_t val_pos_ = 0;
};

}  // namespace detail

// Importance-weighted training (Algorithm: per mini-batch, gather weights,
// estimate on transformed representations with warm-started PGD, scatter,
// then update the classifier on the weighted risk). Baselines reuse the same
// loop with weight estimation replaced or disabled.
inline TrainReport train(const ShiftDataset& data, const TrainConfig& cfg,
                         const TrainHooks* hooks = nullptr) {
    detail::Trainer t(data, cfg, hooks);
    return t.run();
}

}  // namespace driftwt
