#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "driftwt/trainer.hpp"

namespace driftwt {

// ---- enum names ----------------------------------------------------------

inline std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::kmm: return "kmm";
        case Estimator::kliep: return "kliep";
        case Estimator::lsif: return "lsif";
        case Estimator::w1: return "w1";
    }
    return "kmm";
}

inline Estimator estimator_from_string(const std::string& s) {
    if (s == "kmm") return Estimator::kmm;
    if (s == "kliep") return Estimator::kliep;
    if (s == "lsif") return Estimator::lsif;
    if (s == "w1") return Estimator::w1;
    throw config_error("estimator: unknown value '" + s + "' (expected kmm|kliep|lsif|w1)");
}

inline std::string to_string(Transform t) {
    return t == Transform::loss_value ? "loss" : "hidden";
}

inline Transform transform_from_string(const std::string& s) {
    if (s == "loss") return Transform::loss_value;
    if (s == "hidden") return Transform::hidden_layer;
    throw config_error("transform: unknown value '" + s + "' (expected loss|hidden)");
}

inline std::string to_string(Baseline b) {
    switch (b) {
        case Baseline::none: return "none";
        case Baseline::uniform: return "uniform";
        case Baseline::random: return "random";
        case Baseline::val_only: return "valonly";
        case Baseline::diw: return "diw";
    }
    return "none";
}

inline Baseline baseline_from_string(const std::string& s) {
    if (s == "none") return Baseline::none;
    if (s == "uniform") return Baseline::uniform;
    if (s == "random") return Baseline::random;
    if (s == "valonly") return Baseline::val_only;
    if (s == "diw") return Baseline::diw;
    throw config_error("baseline: unknown value '" + s +
                       "' (expected none|uniform|random|valonly|diw)");
}

inline std::string to_string(LrSchedule s) {
    switch (s) {
        case LrSchedule::constant: return "constant";
        case LrSchedule::inv_sqrt_total: return "inv_sqrt_total";
        case LrSchedule::inv_sqrt_epoch: return "inv_sqrt_epoch";
    }
    return "constant";
}

inline LrSchedule lr_schedule_from_string(const std::string& s) {
    if (s == "constant") return LrSchedule::constant;
    if (s == "inv_sqrt_total") return LrSchedule::inv_sqrt_total;
    if (s == "inv_sqrt_epoch") return LrSchedule::inv_sqrt_epoch;
    throw config_error("lr_schedule: unknown value '" + s + "'");
}

inline std::string to_string(OptimizerKind o) { return o == OptimizerKind::sgd ? "sgd" : "adam"; }

inline OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw config_error("optimizer: unknown value '" + s + "' (expected sgd|adam)");
}

// Shortest decimal representation that round-trips.
inline std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---- dataset specification -----------------------------------------------

// Synthetic protocols at desk scale: a spherical Gaussian mixture plus
// optional label noise, class-prior shift or a covariate mean shift of the
// test distribution. kind == "csv" loads a previously exported dataset.
struct DatasetSpec {
    std::string kind = "gaussian_mixture";
    int classes = 2;
    int dim = 2;
    double class_sep = 2.0;
    double sigma = 1.0;
    std::size_t n_train = 2000;
    std::size_t n_val = 100;
    std::size_t n_test = 1000;
    std::string noise_kind = "none";  // none | pair | symmetric
    double noise_rate = 0.0;
    double prior_mu = 0.0;  // > 0 enables class-prior shift
    double prior_rho = 1.0;
    std::size_t val_per_class = 10;
    double test_mean_shift = 0.0;  // added to coordinate 0 of every test-class mean
    std::string csv_path;
};

inline GaussianMixtureSpec mixture_layout(int classes, int dim, double class_sep, double sigma) {
    require(classes >= 2 && dim >= 1, "mixture_layout: need C >= 2 and d >= 1");
    GaussianMixtureSpec spec;
    for (int c = 0; c < classes; ++c) {
        GaussianClassSpec cls;
        cls.sigma = sigma;
        cls.prior = 1.0;
        cls.mean.assign(static_cast<std::size_t>(dim), 0.0);
        if (dim == 1) {
            cls.mean[0] = class_sep * (static_cast<double>(c) -
                                       0.5 * static_cast<double>(classes - 1));
        } else {
            const double ang = 2.0 * 3.14159265358979323846 * static_cast<double>(c) /
                               static_cast<double>(classes);
            cls.mean[0] = class_sep * std::cos(ang);
            cls.mean[1] = class_sep * std::sin(ang);
        }
        spec.classes.push_back(std::move(cls));
    }
    return spec;
}

inline ShiftDataset build_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    if (spec.kind == "csv") {
        std::ifstream f(spec.csv_path);
        if (!f) throw config_error("data.csv_path: cannot open '" + spec.csv_path + "'");
        return read_dataset_csv(f);
    }
    if (spec.kind != "gaussian_mixture")
        throw config_error("data.kind: unknown value '" + spec.kind + "'");

    GaussianMixtureSpec train_mix = mixture_layout(spec.classes, spec.dim, spec.class_sep, spec.sigma);
    GaussianMixtureSpec test_mix = train_mix;
    if (spec.test_mean_shift != 0.0)
        for (auto& c : test_mix.classes) c.mean[0] += spec.test_mean_shift;

    if (spec.prior_mu > 0.0 && spec.prior_rho > 1.0) {
        // Balanced pool, then downsample the minority classes.
        const std::size_t pool_val = std::max<std::size_t>(1, spec.n_train / 10);
        ShiftDataset base = make_gaussian_mixture(train_mix, test_mix, spec.n_train, pool_val,
                                                  spec.n_test, Rng::mix(seed, 0xDA7A));
        return make_class_prior_shift(base, spec.prior_mu, spec.prior_rho, spec.val_per_class,
                                      Rng::mix(seed, 0xDA7B));
    }

    ShiftDataset ds = make_gaussian_mixture(train_mix, test_mix, spec.n_train, spec.n_val,
                                            spec.n_test, Rng::mix(seed, 0xDA7A));
    if (spec.noise_kind == "pair")
        ds = inject_pair_flip(ds, spec.noise_rate, Rng::mix(seed, 0xDA7C));
    else if (spec.noise_kind == "symmetric")
        ds = inject_symmetric_flip(ds, spec.noise_rate, Rng::mix(seed, 0xDA7C));
    else if (spec.noise_kind != "none")
        throw config_error("data.noise_kind: unknown value '" + spec.noise_kind + "'");
    return ds;
}

// ---- experiment specification and config file ------------------------------

struct ExperimentSpec {
    DatasetSpec data;
    TrainConfig train;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::string out_dir = "out";
    int trial_threads = 1;
};

// Flat `key = value` sections. '#' starts a comment.
using ConfigMap = std::map<std::string, std::map<std::string, std::string>>;

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline ConfigMap parse_config_text(const std::string& text) {
    ConfigMap cfg;
    std::string section = "";
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error("config line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            cfg[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) + ": expected key = value");
        cfg[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

namespace detail {

inline double parse_double(const std::string& field, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw config_error(field + ": not a number: '" + v + "'");
    }
}

inline long long parse_int(const std::string& field, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw config_error(field + ": not an integer: '" + v + "'");
    }
}

inline bool parse_bool(const std::string& field, const std::string& v) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw config_error(field + ": expected on|off: '" + v + "'");
}

// "auto" maps to the non-positive sentinel.
inline double parse_auto_double(const std::string& field, const std::string& v) {
    if (v == "auto") return 0.0;
    return parse_double(field, v);
}

template <class T, class F>
void maybe(const ConfigMap& cfg, const std::string& sec, const std::string& key, T& target, F f) {
    auto s = cfg.find(sec);
    if (s == cfg.end()) return;
    auto k = s->second.find(key);
    if (k == s->second.end()) return;
    target = f(sec + "." + key, k->second);
}

}  // namespace detail

inline ExperimentSpec spec_from_config(const ConfigMap& cfg) {
    using namespace detail;
    ExperimentSpec sp;
    auto I = [](const std::string& f, const std::string& v) { return parse_int(f, v); };
    auto U = [](const std::string& f, const std::string& v) {
        const long long x = parse_int(f, v);
        if (x < 0) throw config_error(f + ": must be nonnegative");
        return static_cast<std::size_t>(x);
    };
    auto D = [](const std::string& f, const std::string& v) { return parse_double(f, v); };
    auto A = [](const std::string& f, const std::string& v) { return parse_auto_double(f, v); };
    auto S = [](const std::string&, const std::string& v) { return v; };
    auto B = [](const std::string& f, const std::string& v) { return parse_bool(f, v); };

    maybe(cfg, "data", "kind", sp.data.kind, S);
    maybe(cfg, "data", "classes", sp.data.classes, [&](auto f, auto v) { return static_cast<int>(I(f, v)); });
    maybe(cfg, "data", "dim", sp.data.dim, [&](auto f, auto v) { return static_cast<int>(I(f, v)); });
    maybe(cfg, "data", "class_sep", sp.data.class_sep, D);
    maybe(cfg, "data", "sigma", sp.data.sigma, D);
    maybe(cfg, "data", "n_train", sp.data.n_train, U);
    maybe(cfg, "data", "n_val", sp.data.n_val, U);
    maybe(cfg, "data", "n_test", sp.data.n_test, U);
    maybe(cfg, "data", "noise_kind", sp.data.noise_kind, S);
    maybe(cfg, "data", "noise_rate", sp.data.noise_rate, D);
    maybe(cfg, "data", "prior_mu", sp.data.prior_mu, D);
    maybe(cfg, "data", "prior_rho", sp.data.prior_rho, D);
    maybe(cfg, "data", "val_per_class", sp.data.val_per_class, U);
    maybe(cfg, "data", "test_mean_shift", sp.data.test_mean_shift, D);
    maybe(cfg, "data", "csv_path", sp.data.csv_path, S);

    maybe(cfg, "train", "estimator", sp.train.estimator,
          [](auto, auto v) { return estimator_from_string(v); });
    maybe(cfg, "train", "transform", sp.train.transform,
          [](auto, auto v) { return transform_from_string(v); });
    maybe(cfg, "train", "baseline", sp.train.baseline,
          [](auto, auto v) { return baseline_from_string(v); });
    maybe(cfg, "train", "epochs", sp.train.epochs, [&](auto f, auto v) { return static_cast<int>(I(f, v)); });
    maybe(cfg, "train", "batch_size", sp.train.batch_size, U);
    maybe(cfg, "train", "lr", sp.train.lr, D);
    maybe(cfg, "train", "lr_schedule", sp.train.lr_schedule,
          [](auto, auto v) { return lr_schedule_from_string(v); });
    maybe(cfg, "train", "optimizer", sp.train.optimizer,
          [](auto, auto v) { return optimizer_from_string(v); });
    maybe(cfg, "train", "hidden", sp.train.hidden_dim, U);

    maybe(cfg, "we", "steps", sp.train.we.steps, [&](auto f, auto v) { return static_cast<int>(I(f, v)); });
    maybe(cfg, "we", "eta", sp.train.we.eta, A);
    maybe(cfg, "we", "epsilon", sp.train.we.epsilon, D);
    maybe(cfg, "we", "sigma", sp.train.we.sigma, A);
    maybe(cfg, "we", "lambda", sp.train.we.lambda, D);
    maybe(cfg, "we", "kappa", sp.train.we.kappa, D);
    maybe(cfg, "we", "critic_lr", sp.train.we.critic_lr, D);
    maybe(cfg, "we", "critic_warm_batches", sp.train.we.critic_warm_batches,
          [&](auto f, auto v) { return static_cast<int>(I(f, v)); });
    maybe(cfg, "we", "critic_updates", sp.train.we.critic_updates,
          [&](auto f, auto v) { return static_cast<int>(I(f, v)); });
    maybe(cfg, "we", "critic_hidden", sp.train.we.critic_hidden, U);
    maybe(cfg, "we", "w2_clamp", sp.train.we.w2_clamp, B);

    maybe(cfg, "run", "out", sp.out_dir, S);
    maybe(cfg, "run", "weight_snapshot_stride", sp.train.weight_snapshot_stride,
          [&](auto f, auto v) { return static_cast<int>(I(f, v)); });
    maybe(cfg, "run", "trial_threads", sp.trial_threads,
          [&](auto f, auto v) { return static_cast<int>(I(f, v)); });
    maybe(cfg, "run", "we_threads", sp.train.we_threads,
          [&](auto f, auto v) { return static_cast<int>(I(f, v)); });
    if (auto s = cfg.find("run"); s != cfg.end()) {
        if (auto k = s->second.find("seeds"); k != s->second.end()) {
            sp.seeds.clear();
            std::stringstream ss(k->second);
            std::string tok;
            while (std::getline(ss, tok, ','))
                sp.seeds.push_back(
                    static_cast<std::uint64_t>(detail::parse_int("run.seeds", trim(tok))));
            if (sp.seeds.empty()) throw config_error("run.seeds: empty seed list");
        }
    }
    return sp;
}

inline std::string serialize_spec(const ExperimentSpec& sp) {
    std::ostringstream os;
    auto auto_or = [](double v) { return v > 0 ? fmt_double(v) : std::string("auto"); };
    os << "[data]\n";
    os << "kind = " << sp.data.kind << "\n";
    os << "classes = " << sp.data.classes << "\n";
    os << "dim = " << sp.data.dim << "\n";
    os << "class_sep = " << fmt_double(sp.data.class_sep) << "\n";
    os << "sigma = " << fmt_double(sp.data.sigma) << "\n";
    os << "n_train = " << sp.data.n_train << "\n";
    os << "n_val = " << sp.data.n_val << "\n";
    os << "n_test = " << sp.data.n_test << "\n";
    os << "noise_kind = " << sp.data.noise_kind << "\n";
    os << "noise_rate = " << fmt_double(sp.data.noise_rate) << "\n";
    os << "prior_mu = " << fmt_double(sp.data.prior_mu) << "\n";
    os << "prior_rho = " << fmt_double(sp.data.prior_rho) << "\n";
    os << "val_per_class = " << sp.data.val_per_class << "\n";
    os << "test_mean_shift = " << fmt_double(sp.data.test_mean_shift) << "\n";
    if (!sp.data.csv_path.empty()) os << "csv_path = " << sp.data.csv_path << "\n";
    os << "\n[train]\n";
    os << "estimator = " << to_string(sp.train.estimator) << "\n";
    os << "transform = " << to_string(sp.train.transform) << "\n";
    os << "baseline = " << to_string(sp.train.baseline) << "\n";
    os << "epochs = " << sp.train.epochs << "\n";
    os << "batch_size = " << sp.train.batch_size << "\n";
    os << "lr = " << fmt_double(sp.train.lr) << "\n";
    os << "lr_schedule = " << to_string(sp.train.lr_schedule) << "\n";
    os << "optimizer = " << to_string(sp.train.optimizer) << "\n";
    os << "hidden = " << sp.train.hidden_dim << "\n";
    os << "\n[we]\n";
    os << "steps = " << sp.train.we.steps << "\n";
    os << "eta = " << auto_or(sp.train.we.eta) << "\n";
    os << "epsilon = " << fmt_double(sp.train.we.epsilon) << "\n";
    os << "sigma = " << auto_or(sp.train.we.sigma) << "\n";
    os << "lambda = " << fmt_double(sp.train.we.lambda) << "\n";
    os << "kappa = " << fmt_double(sp.train.we.kappa) << "\n";
    os << "critic_lr = " << fmt_double(sp.train.we.critic_lr) << "\n";
    os << "critic_warm_batches = " << sp.train.we.critic_warm_batches << "\n";
    os << "critic_updates = " << sp.train.we.critic_updates << "\n";
    os << "critic_hidden = " << sp.train.we.critic_hidden << "\n";
    os << "w2_clamp = " << (sp.train.we.w2_clamp ? "on" : "off") << "\n";
    os << "\n[run]\n";
    os << "out = " << sp.out_dir << "\n";
    os << "seeds = ";
    for (std::size_t i = 0; i < sp.seeds.size(); ++i)
        os << (i ? "," : "") << sp.seeds[i];
    os << "\n";
    os << "weight_snapshot_stride = " << sp.train.weight_snapshot_stride << "\n";
    os << "trial_threads = " << sp.trial_threads << "\n";
    os << "we_threads = " << sp.train.we_threads << "\n";
    return os.str();
}

// ---- report emission --------------------------------------------------------

inline nlohmann::json report_to_json(const TrainReport& rep, const ExperimentSpec& sp,
                                     std::uint64_t seed) {
    nlohmann::json j;
    j["seed"] = seed;
    j["estimator"] = to_string(sp.train.estimator);
    j["transform"] = to_string(sp.train.transform);
    j["baseline"] = to_string(sp.train.baseline);
    j["num_classes"] = rep.num_classes;
    j["batches_total"] = rep.batches_total;
    j["skipped_batches_total"] = rep.skipped_batches_total;
    j["we_stage_seconds"] = rep.we_stage_seconds;
    j["final10_test_acc"] = rep.final_window_acc();
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : rep.epochs) {
        nlohmann::json je;
        je["epoch"] = e.epoch;
        je["test_top1"] = e.test_top1;
        je["test_topk"] = e.test_topk;
        je["val_top1"] = e.val_top1;
        je["weighted_risk_mean"] = e.weighted_risk_mean;
        je["batch_grad_sq_mean"] = e.batch_grad_sq_mean;
        je["full_grad_norm_sq"] = e.full_grad_norm_sq;
        je["weight_mean"] = e.weight_mean;
        je["weight_cv"] = e.weight_cv;
        je["weight_mean_clean"] = e.weight_mean_clean;
        je["weight_mean_noisy"] = e.weight_mean_noisy;
        je["weight_mean_by_class"] = e.weight_mean_by_class;
        je["skipped_batches"] = e.skipped_batches;
        je["epoch_seconds"] = e.epoch_seconds;
        epochs.push_back(std::move(je));
    }
    j["epochs"] = std::move(epochs);
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : rep.stages)
        stages.push_back({{"stage", s.stage}, {"seconds", s.seconds}, {"percent", s.percent}});
    j["stages"] = std::move(stages);
    return j;
}

inline void write_epochs_csv(std::ostream& os, const TrainReport& rep) {
    os << "epoch,test_top1,test_topk,val_top1,weighted_risk_mean,batch_grad_sq_mean,"
          "full_grad_norm_sq,weight_mean,weight_cv,weight_mean_clean,weight_mean_noisy,"
          "skipped_batches";
    for (int c = 0; c < rep.num_classes; ++c) os << ",weight_mean_class" << c;
    os << "\n";
    for (const auto& e : rep.epochs) {
        os << e.epoch << ',' << fmt_double(e.test_top1) << ',' << fmt_double(e.test_topk) << ','
           << fmt_double(e.val_top1) << ',' << fmt_double(e.weighted_risk_mean) << ','
           << fmt_double(e.batch_grad_sq_mean) << ',' << fmt_double(e.full_grad_norm_sq) << ','
           << fmt_double(e.weight_mean) << ',' << fmt_double(e.weight_cv) << ','
           << fmt_double(e.weight_mean_clean) << ',' << fmt_double(e.weight_mean_noisy) << ','
           << e.skipped_batches;
        for (double v : e.weight_mean_by_class) os << ',' << fmt_double(v);
        os << "\n";
    }
}

inline void write_weight_snapshot_csv(std::ostream& os, const Vec& weights,
                                      const std::vector<bool>& noisy) {
    os << "index,weight,is_noisy\n";
    for (std::size_t i = 0; i < weights.size(); ++i)
        os << i << ',' << fmt_double(weights[i]) << ','
           << ((i < noisy.size() && noisy[i]) ? 1 : 0) << "\n";
}

// Deterministic aggregate row over trials: accuracy stats are computed on the
// final-10-epoch window, matching the reporting convention of the per-trial
// JSON. No wall-clock fields, so reruns are byte-identical.
inline std::string aggregate_csv(const ExperimentSpec& sp,
                                 const std::vector<TrainReport>& reports) {
    std::ostringstream os;
    os << "estimator,transform,baseline,epochs,batch_size,n_trials,seeds,"
          "acc_final10_per_trial,acc_final10_mean,acc_final10_std,weight_mean_final\n";
    std::vector<double> accs;
    double wmean = 0.0;
    for (const auto& r : reports) {
        accs.push_back(r.final_window_acc());
        wmean += r.epochs.back().weight_mean;
    }
    wmean /= static_cast<double>(reports.size());
    double m = 0.0;
    for (double a : accs) m += a;
    m /= static_cast<double>(accs.size());
    double var = 0.0;
    for (double a : accs) var += (a - m) * (a - m);
    var /= static_cast<double>(accs.size());
    os << to_string(sp.train.estimator) << ',' << to_string(sp.train.transform) << ','
       << to_string(sp.train.baseline) << ',' << sp.train.epochs << ',' << sp.train.batch_size
       << ',' << sp.seeds.size() << ',';
    for (std::size_t i = 0; i < sp.seeds.size(); ++i) os << (i ? ";" : "") << sp.seeds[i];
    os << ',';
    for (std::size_t i = 0; i < accs.size(); ++i) os << (i ? ";" : "") << fmt_double(accs[i]);
    os << ',' << fmt_double(m) << ',' << fmt_double(std::sqrt(var)) << ',' << fmt_double(wmean)
       << "\n";
    return os.str();
}

// Runs every trial in the spec and writes per-trial and aggregate artifacts
// under out_dir. Returns 0 on success.
inline int run_experiment(const ExperimentSpec& sp, std::ostream& log = std::cout) {
    namespace fs = std::filesystem;
    fs::create_directories(sp.out_dir);
    {
        std::ofstream f(fs::path(sp.out_dir) / "config.ini");
        f << serialize_spec(sp);
    }
    std::vector<TrainReport> reports(sp.seeds.size());
    auto run_trial = [&](std::size_t t) {
        const std::uint64_t seed = sp.seeds[t];
        ShiftDataset ds = build_dataset(sp.data, seed);
        TrainConfig cfg = sp.train;
        cfg.seed = seed;
        reports[t] = train(ds, cfg);
    };
    if (sp.trial_threads > 1) {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        const int nthreads = std::min<int>(sp.trial_threads, static_cast<int>(sp.seeds.size()));
        for (int w = 0; w < nthreads; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < sp.seeds.size(); i = next.fetch_add(1))
                    run_trial(i);
            });
        for (auto& th : pool) th.join();
    } else {
        for (std::size_t t = 0; t < sp.seeds.size(); ++t) run_trial(t);
    }

    for (std::size_t t = 0; t < sp.seeds.size(); ++t) {
        const std::uint64_t seed = sp.seeds[t];
        const TrainReport& rep = reports[t];
        const std::string base = "trial_" + std::to_string(seed);
        {
            std::ofstream f(fs::path(sp.out_dir) / (base + ".json"));
            f << report_to_json(rep, sp, seed).dump(2) << "\n";
        }
        {
            std::ofstream f(fs::path(sp.out_dir) / (base + "_epochs.csv"));
            write_epochs_csv(f, rep);
        }
        {
            std::ofstream f(fs::path(sp.out_dir) / (base + "_stages.csv"));
            write_stage_csv(f, rep.stages);
        }
        {
            std::ofstream f(fs::path(sp.out_dir) / (base + "_weights_final.csv"));
            write_weight_snapshot_csv(f, rep.final_weights, rep.train_noisy_flags);
        }
        for (const auto& [epoch, w] : rep.weight_snapshots) {
            std::ofstream f(fs::path(sp.out_dir) /
                            (base + "_weights_epoch" + std::to_string(epoch) + ".csv"));
            write_weight_snapshot_csv(f, w, rep.train_noisy_flags);
        }
        log << base << ": final10 test acc " << fmt_double(rep.final_window_acc()) << "\n";
    }
    {
        std::ofstream f(fs::path(sp.out_dir) / "aggregate.csv");
        f << aggregate_csv(sp, reports);
    }
    return 0;
}

// Grid sweep: [sweep] keys are "section.key" with comma-separated values.
// Each combination runs into its own subdirectory.
inline int run_sweep(const ExperimentSpec& base_spec, const ConfigMap& raw,
                     std::ostream& log = std::cout) {
    auto sweep_it = raw.find("sweep");
    if (sweep_it == raw.end() || sweep_it->second.empty())
        throw config_error("sweep: missing [sweep] section");
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    for (const auto& [key, csv] : sweep_it->second) {
        std::vector<std::string> vals;
        std::stringstream ss(csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) vals.push_back(trim(tok));
        if (vals.empty()) throw config_error("sweep." + key + ": empty value list");
        axes.emplace_back(key, std::move(vals));
    }
    std::vector<std::size_t> cursor(axes.size(), 0);
    int rc = 0;
    while (true) {
        ConfigMap combo = raw;
        combo.erase("sweep");
        std::string tag;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const auto& key = axes[a].first;
            const auto& val = axes[a].second[cursor[a]];
            const auto dot = key.find('.');
            if (dot == std::string::npos)
                throw config_error("sweep." + key + ": expected section.key");
            combo[key.substr(0, dot)][key.substr(dot + 1)] = val;
            tag += (a ? "_" : "") + key.substr(dot + 1) + "-" + val;
        }
        ExperimentSpec sp = spec_from_config(combo);
        sp.out_dir = base_spec.out_dir + "/" + tag;
        log << "sweep: " << tag << "\n";
        rc |= run_experiment(sp, log);
        std::size_t a = 0;
        for (; a < axes.size(); ++a) {
            if (++cursor[a] < axes[a].second.size()) break;
            cursor[a] = 0;
        }
        if (a == axes.size()) break;
    }
    return rc;
}

}  // namespace driftwt
