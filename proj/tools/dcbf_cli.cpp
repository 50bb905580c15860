// SPDX-License-Identifier: Apache-2.0
//
// dcbf: command-line front end for the channel-prediction lab.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dcbf/errors.hpp"
#include "dcbf/harness.hpp"
#include "dcbf/text_io.hpp"

namespace fs = std::filesystem;
using namespace dcbf;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config = "default";
    std::vector<std::string> settings;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App& cmd, Common& c) {
    cmd.add_option("--config", c.config, "Config file, or 'default' for built-in defaults")->capture_default_str();
    cmd.add_option("--set", c.settings, "Override one setting, e.g. --set training.epochs=5");
    cmd.add_option("--seed", c.seed, "Seed (defaults to the first seed in the config)");
    cmd.add_option("--out", c.out, "Artifact directory");
}

ExperimentConfig load(const Common& c) {
    ExperimentConfig config;
    try {
        if (c.config != "default") {
            if (!fs::exists(c.config)) {
                throw UsageError("config file not found: " + c.config);
            }
            config = load_config(c.config);
        }
        for (const std::string& s : c.settings) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) {
                throw UsageError("--set expects key=value, got '" + s + "'");
            }
            apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
        }
        config.validate();
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw UsageError(std::string("bad configuration (") + c.config + "): " + e.what());
    }
    if (!c.out.empty()) {
        config.output_dir = c.out;
    }
    return config;
}

std::uint64_t seed_of(const Common& c, const ExperimentConfig& config) {
    return c.seed.value_or(config.seeds.front());
}

fs::path require_out(const Common& c) {
    if (c.out.empty()) {
        throw UsageError("--out is required for this command");
    }
    fs::create_directories(c.out);
    return c.out;
}

Architecture parse_arch(const std::string& name) {
    if (name == "mlp") {
        return Architecture::mlp;
    }
    if (name == "gru") {
        return Architecture::gru;
    }
    throw UsageError("unknown architecture '" + name + "' (expected mlp or gru)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DCBF channel-prediction lab"};
    app.require_subcommand(1);

    Common generate_opts;
    auto* generate = app.add_subcommand("generate", "Write the channel trace for one seed");
    add_common(*generate, generate_opts);

    Common train_opts;
    std::string train_arch = "mlp";
    auto* train = app.add_subcommand("train", "Train one quantile predictor and write its checkpoint");
    add_common(*train, train_opts);
    train->add_option("--arch", train_arch, "mlp or gru")->capture_default_str();

    Common calibrate_opts;
    std::string calibrate_arch = "mlp";
    auto* calibrate = app.add_subcommand("calibrate", "Fit conformal offsets for a trained checkpoint in --out");
    add_common(*calibrate, calibrate_opts);
    calibrate->add_option("--arch", calibrate_arch, "mlp or gru")->capture_default_str();

    Common evaluate_opts;
    std::string method_name;
    double power = 10.0;
    auto* evaluate = app.add_subcommand("evaluate", "Print the NMSE in dB of one (method, power) cell");
    add_common(*evaluate, evaluate_opts);
    evaluate->add_option("--method", method_name, "outdated, kf, mlp, gru, dcbf_mlp or dcbf_gru")->required();
    evaluate->add_option("--power", power, "Transmit power in dBm")->capture_default_str();

    Common sweep_opts;
    bool reuse = false;
    auto* sweep = app.add_subcommand("sweep", "Run every (seed, power, method) cell and write results.csv");
    add_common(*sweep, sweep_opts);
    sweep->add_flag("--reuse", reuse, "Load checkpoints and offsets already present in --out");

    std::string csv;
    auto* report = app.add_subcommand("report", "Aggregate a results CSV into per-method mean and std");
    report->add_option("csv", csv, "results.csv written by sweep")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        if (*generate) {
            const ExperimentConfig config = load(generate_opts);
            const fs::path dir = require_out(generate_opts);
            const std::uint64_t seed = seed_of(generate_opts, config);
            const fs::path path = trace_path(dir, seed);
            save_trace(path, make_trace(config, seed));
            std::cout << path.string() << '\n';
        } else if (*train) {
            const ExperimentConfig config = load(train_opts);
            const Architecture arch = parse_arch(train_arch);
            const fs::path dir = require_out(train_opts);
            const std::uint64_t seed = seed_of(train_opts, config);
            const ChannelTrace trace = make_trace(config, seed);
            const DatasetSplit split = split_dataset(trace.length(), static_cast<std::size_t>(config.history));
            const TrainResult r = train_predictor(config, trace, split, arch, seed);
            const fs::path path = checkpoint_path(dir, arch, seed);
            save_checkpoint(path, r.params);
            std::cout << path.string() << " best_epoch=" << r.best_epoch
                      << " val_loss=" << format_double(r.val_loss[static_cast<std::size_t>(r.best_epoch - 1)]) << '\n';
        } else if (*calibrate) {
            const ExperimentConfig config = load(calibrate_opts);
            const Architecture arch = parse_arch(calibrate_arch);
            const fs::path dir = require_out(calibrate_opts);
            const std::uint64_t seed = seed_of(calibrate_opts, config);
            const fs::path ckpt = checkpoint_path(dir, arch, seed);
            if (!fs::exists(ckpt)) {
                throw std::runtime_error("no checkpoint at " + ckpt.string() + "; run 'dcbf train' first");
            }
            const ChannelTrace trace = make_trace(config, seed);
            const DatasetSplit split = split_dataset(trace.length(), static_cast<std::size_t>(config.history));
            const fs::path path = offsets_path(dir, arch, seed);
            save_calibration(path, calibrate_predictor(config, load_checkpoint(ckpt), trace, split, seed));
            std::cout << path.string() << '\n';
        } else if (*evaluate) {
            const ExperimentConfig config = load(evaluate_opts);
            Method method;
            try {
                method = parse_method(method_name);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            const std::uint64_t seed = seed_of(evaluate_opts, config);
            const SeedArtifacts art = prepare_seed(config, seed, {method}, !config.output_dir.empty());
            std::cout << format_double(evaluate_cell(config, art, method, power)) << '\n';
        } else if (*sweep) {
            ExperimentConfig config = load(sweep_opts);
            if (sweep_opts.seed) {
                config.seeds = {*sweep_opts.seed};
            }
            const ExperimentResult r = run_experiment(config, reuse);
            if (config.output_dir.empty()) {
                write_csv(std::cout, r.rows);
            } else {
                const fs::path path = config.output_dir / "results.csv";
                std::ofstream out(path);
                write_csv(out, r.rows);
                if (!out) {
                    throw std::runtime_error("cannot write " + path.string());
                }
                std::cerr << "wrote " << r.rows.size() << " rows to " << path.string() << '\n';
            }
            for (const std::string& f : r.failures) {
                std::cerr << "cell failed: " << f << '\n';
            }
            return r.ok() ? 0 : kRuntimeFailure;
        } else if (*report) {
            std::ifstream in(csv);
            if (!in) {
                throw UsageError("cannot open results file " + csv);
            }
            write_report(std::cout, aggregate(read_csv(in)));
        }
    } catch (const UsageError& e) {
        std::cerr << "dcbf: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "dcbf: " << e.what() << '\n';
        return kRuntimeFailure;
    }
    return 0;
}
