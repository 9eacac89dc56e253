// hwaware: command-line front end for the variability model, training and
// transfer-robustness experiments.
//
// Exit status: 0 success, 2 bad input (missing/malformed file or config),
// 1 any other failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hwaware/model_io.hpp"
#include "hwaware/pipeline.hpp"
#include "hwaware/shapiro_wilk.hpp"

namespace fs = std::filesystem;
using namespace hwaware;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint32_t> transfers;
    std::optional<unsigned> threads;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
    cmd->add_option("--config", c.config, "experiment config JSON");
    cmd->add_option("--seed", c.seed, "seed override");
    cmd->add_option("--transfers", c.transfers, "number of simulated transfers");
    cmd->add_option("--threads", c.threads, "worker threads");
    auto* out = cmd->add_option("--out", c.out, "output path");
    if (out_required) out->required();
}

ExperimentConfig base_config(const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
    if (c.transfers) cfg.transfers = *c.transfers;
    if (c.threads) cfg.threads = *c.threads;
    return cfg;
}

void print_fit(const TuningFit& fit) {
    std::size_t rejected = 0, tested = 0;
    for (const auto& g : fit.groups) {
        if (!g.shapiro_p) continue;
        ++tested;
        rejected += *g.shapiro_p < 0.05;
    }
    std::printf("tuning groups: %zu (Shapiro-Wilk tested %zu, rejected at 0.05: %zu)\n",
                fit.groups.size(), tested, rejected);
    std::printf("f(g) = %.6g * g + %.6g  [%%]\n", fit.std_model.slope, fit.std_model.intercept);
    std::printf("offset ~ N(%.6g %%, %.6g %%)\n", fit.offset_model.mu_off, fit.offset_model.sigma_off);
}

int cmd_fit_model(const std::string& tuning, const std::string& bias, const std::string& stuck,
                  const std::string& out, double g_min, double g_max) {
    auto fit = fit_tuning_model(read_tuning_csv(tuning));
    print_fit(fit);
    auto recordings = read_stuck_csv(stuck);
    if (recordings.hrs.size() >= 3) {
        try {
            auto sw = shapiro_wilk(recordings.hrs);
            std::printf("HRS recordings: n=%zu, Shapiro-Wilk W=%.4f p=%.4g\n", recordings.hrs.size(), sw.w, sw.p);
        } catch (const std::invalid_argument&) {
        }
    }
    VariabilityModel model;
    model.range = {g_min, g_max};
    model.std_model = fit.std_model;
    model.offset_model = fit.offset_model;
    model.bias_db = build_bias_db(read_bias_csv(bias));
    model.stuck_model = build_stuck_model(recordings.lrs);
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError(std::string("fitted model is invalid: ") + e.what());
    }
    save_model(model, out);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

void print_report_summary(const char* name, const RobustnessReport& report) {
    std::printf("%s: %u transfers, share >= 95%%: %.4f, >= 90%%: %.4f, >= 80%%: %.4f\n", name,
                report.transfers, share_at_least(report, 950), share_at_least(report, 900),
                share_at_least(report, 800));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hardware-aware training and transfer simulation for passive ReRAM crossbars"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    // fit-model
    std::string tuning_csv, bias_csv, stuck_csv, fit_out;
    double g_min = 100.0, g_max = 400.0;
    auto* fit = app.add_subcommand("fit-model", "fit a variability model from raw CSV recordings");
    fit->add_option("--tuning", tuning_csv, "device_id,g_target_uS,read_uS")->required();
    fit->add_option("--bias", bias_csv, "n_d,delta_g_uS")->required();
    fit->add_option("--stuck", stuck_csv, "kind,g_uS")->required();
    fit->add_option("--g-min", g_min, "lower end of the programming window (uS)");
    fit->add_option("--g-max", g_max, "upper end of the programming window (uS)");
    fit->add_option("--out", fit_out, "model JSON to write")->required();

    // gen-synthetic-model
    std::uint64_t synth_seed = 2023;
    std::string synth_out;
    auto* synth = app.add_subcommand("gen-synthetic-model", "write the synthetic default model");
    synth->add_option("--seed", synth_seed);
    synth->add_option("--out", synth_out)->required();

    // train
    Common train_opts;
    bool hardware_aware = false, regular = false;
    auto* train = app.add_subcommand("train", "train one network and write its checkpoint");
    add_common(train, train_opts);
    auto* hw_flag = train->add_flag("--hardware-aware", hardware_aware);
    auto* reg_flag = train->add_flag("--regular", regular);
    hw_flag->excludes(reg_flag);

    // evaluate
    Common eval_opts;
    std::string eval_net;
    auto* eval = app.add_subcommand("evaluate", "simulate transfers of a trained network");
    add_common(eval, eval_opts);
    eval->add_option("--network", eval_net, "network checkpoint")->required();

    // heatmap
    Common heat_opts;
    std::string heat_net;
    std::optional<std::uint32_t> heat_reps;
    auto* heat = app.add_subcommand("heatmap", "classification variability over the input plane");
    add_common(heat, heat_opts);
    heat->add_option("--network", heat_net, "network checkpoint")->required();
    heat->add_option("--repetitions", heat_reps, "transfers per cell (default from config)");

    // run
    Common run_opts;
    auto* run = app.add_subcommand("run", "train both networks, evaluate, write all artifacts");
    add_common(run, run_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit) {
            return cmd_fit_model(tuning_csv, bias_csv, stuck_csv, fit_out, g_min, g_max);
        }
        if (*synth) {
            save_model(make_synthetic_model(synth_seed), synth_out);
            std::printf("wrote %s\n", synth_out.c_str());
            return 0;
        }
        if (*train) {
            auto cfg = base_config(train_opts);
            if (train_opts.seed) cfg.training.seed = *train_opts.seed;
            auto [train_set, test_set] = make_dataset(cfg.dataset);
            TrainingResult result;
            if (regular) {
                result = train_regular(cfg.training, train_set);
            } else {
                result = train_hardware_aware(cfg.training, train_set, resolve_model(cfg));
                for (std::size_t l = 0; l < result.mean_stuck_fraction.size(); ++l) {
                    std::printf("layer %zu: mean share of stuck-affected weights per batch %.4f\n", l,
                                result.mean_stuck_fraction[l]);
                }
            }
            std::printf("final epoch loss %.6f, clean test accuracy %.4f\n", result.epoch_loss.back(),
                        accuracy(result.net, test_set));
            save_net(result.net, train_opts.out);
            return 0;
        }
        if (*eval) {
            auto cfg = base_config(eval_opts);
            if (eval_opts.seed) cfg.eval_seed = *eval_opts.seed;
            auto net = load_net(eval_net);
            auto model = resolve_model(cfg);
            auto [train_set, test_set] = make_dataset(cfg.dataset);
            auto report = evaluate_transfers(net, model,
                                             layouts_for(net, cfg.training.tile_rows, cfg.training.tile_cols),
                                             cfg.training.transfer, test_set, cfg.transfers, cfg.eval_seed,
                                             cfg.threads);
            fs::create_directories(eval_opts.out);
            write_report_json(report, test_set, fs::path(eval_opts.out) / "report.json");
            write_table_csv(report, fs::path(eval_opts.out) / "table.csv");
            write_curve_csv(report, fs::path(eval_opts.out) / "curve.csv");
            print_report_summary(eval_net.c_str(), report);
            return 0;
        }
        if (*heat) {
            auto cfg = base_config(heat_opts);
            if (heat_opts.seed) cfg.eval_seed = *heat_opts.seed;
            auto net = load_net(heat_net);
            auto model = resolve_model(cfg);
            auto grid = heatmap(net, model, layouts_for(net, cfg.training.tile_rows, cfg.training.tile_cols),
                                cfg.training.transfer, cfg.heatmap.grid,
                                heat_reps.value_or(cfg.heatmap.repetitions), cfg.eval_seed, cfg.threads);
            fs::create_directories(heat_opts.out);
            write_heatmap_csv(grid, fs::path(heat_opts.out) / "heatmap.csv");
            return 0;
        }
        if (*run) {
            auto cfg = base_config(run_opts);
            if (run_opts.seed) cfg.training.seed = *run_opts.seed;
            fs::create_directories(run_opts.out);
            auto s = run_experiment(cfg, run_opts.out);
            std::printf("clean test accuracy: HANN %.4f, NN %.4f\n", s.hann_clean_test_accuracy,
                        s.nn_clean_test_accuracy);
            std::printf("share of test points correct in >= 95%% of transfers: HANN %.4f, NN %.4f\n",
                        s.hann_share_95, s.nn_share_95);
            if (!s.hann_mean_stuck_fraction.empty()) {
                std::printf("HANN first layer: mean share of stuck-affected weights per batch %.4f\n",
                            s.hann_mean_stuck_fraction.front());
            }
            std::printf("artifacts in %s\n", run_opts.out.c_str());
            return 0;
        }
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ModelFormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
