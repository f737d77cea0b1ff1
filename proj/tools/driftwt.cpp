// driftwt: importance-weighted training under joint distribution shift.
//
// Subcommands:
//   train     run the trials of one experiment spec
//   sweep     grid over the [sweep] section of the config
//   oracle    weight-estimation benchmark against an analytic density ratio
//   profile   windowed stage timing of one training run
//   selftest  fast invariant battery

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "driftwt/driftwt.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string estimator, transform, baseline;
    long long seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "config file (key = value sections)");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override the seed list with one seed");
    cmd->add_option("--estimator", args.estimator, "kmm|kliep|lsif|w1");
    cmd->add_option("--transform", args.transform, "loss|hidden");
    cmd->add_option("--baseline", args.baseline, "uniform|random|valonly|diw");
}

driftwt::ConfigMap load_config(const CommonArgs& args) {
    if (args.config_path.empty()) return {};
    std::ifstream f(args.config_path);
    if (!f) throw driftwt::config_error("--config: cannot open '" + args.config_path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return driftwt::parse_config_text(ss.str());
}

driftwt::ExperimentSpec resolve_spec(const CommonArgs& args, const driftwt::ConfigMap& cfg) {
    driftwt::ExperimentSpec sp = driftwt::spec_from_config(cfg);
    if (!args.out_dir.empty()) sp.out_dir = args.out_dir;
    if (!args.estimator.empty()) sp.train.estimator = driftwt::estimator_from_string(args.estimator);
    if (!args.transform.empty()) sp.train.transform = driftwt::transform_from_string(args.transform);
    if (!args.baseline.empty()) sp.train.baseline = driftwt::baseline_from_string(args.baseline);
    if (args.seed >= 0) sp.seeds = {static_cast<std::uint64_t>(args.seed)};
    return sp;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"importance-weighted training under joint distribution shift"};
    app.require_subcommand(1);

    CommonArgs train_args, sweep_args, oracle_args, profile_args;
    CLI::App* cmd_train = app.add_subcommand("train", "run one experiment spec");
    add_common(cmd_train, train_args);
    CLI::App* cmd_sweep = app.add_subcommand("sweep", "grid over the [sweep] section");
    add_common(cmd_sweep, sweep_args);
    CLI::App* cmd_oracle =
        app.add_subcommand("oracle", "estimator NMSE against an analytic density ratio");
    add_common(cmd_oracle, oracle_args);
    CLI::App* cmd_profile = app.add_subcommand("profile", "windowed stage timing");
    add_common(cmd_profile, profile_args);
    app.add_subcommand("selftest", "run the invariant battery");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_train->parsed()) {
            const auto cfg = load_config(train_args);
            return driftwt::run_experiment(resolve_spec(train_args, cfg));
        }
        if (cmd_sweep->parsed()) {
            const auto cfg = load_config(sweep_args);
            return driftwt::run_sweep(resolve_spec(sweep_args, cfg), cfg);
        }
        if (cmd_oracle->parsed()) {
            const auto cfg = load_config(oracle_args);
            driftwt::RatioBenchConfig bc;
            if (auto s = cfg.find("oracle"); s != cfg.end()) {
                const auto& kv = s->second;
                auto num = [&](const char* key, double& target) {
                    if (auto it = kv.find(key); it != kv.end())
                        target = std::stod(it->second);
                };
                num("shift", bc.shift);
                num("epsilon", bc.epsilon);
                num("lambda", bc.lambda);
                num("sigma", bc.sigma);
                num("w1_eta", bc.w1_eta);
                num("w1_critic_lr", bc.w1_critic_lr);
                if (auto it = kv.find("n_train"); it != kv.end())
                    bc.n_train = static_cast<std::size_t>(std::stoull(it->second));
                if (auto it = kv.find("n_val"); it != kv.end())
                    bc.n_val = static_cast<std::size_t>(std::stoull(it->second));
                if (auto it = kv.find("w1_rounds"); it != kv.end())
                    bc.w1_rounds = std::stoi(it->second);
            }
            if (oracle_args.seed >= 0) bc.seed = static_cast<std::uint64_t>(oracle_args.seed);
            const auto rows = driftwt::run_ratio_bench(bc);
            driftwt::print_ratio_bench(rows, std::cout);
            if (!oracle_args.out_dir.empty()) {
                std::filesystem::create_directories(oracle_args.out_dir);
                std::ofstream f(std::filesystem::path(oracle_args.out_dir) / "oracle_nmse.csv");
                f << "estimator,nmse\n";
                for (const auto& r : rows)
                    f << r.estimator << ',' << driftwt::fmt_double(r.nmse) << "\n";
            }
            return 0;
        }
        if (cmd_profile->parsed()) {
            const auto cfg = load_config(profile_args);
            driftwt::ExperimentSpec sp = resolve_spec(profile_args, cfg);
            sp.train.profile = driftwt::WindowPolicy{10, 2, 10};
            if (sp.seeds.size() > 1) sp.seeds.resize(1);
            return driftwt::run_experiment(sp);
        }
        return driftwt::run_selftest();
    } catch (const driftwt::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
