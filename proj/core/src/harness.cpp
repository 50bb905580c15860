// SPDX-License-Identifier: Apache-2.0
#include "dcbf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "dcbf/errors.hpp"
#include "dcbf/random.hpp"
#include "dcbf/text_io.hpp"

namespace dcbf {

std::string_view to_string(Method method) {
    switch (method) {
    case Method::outdated: return "outdated";
    case Method::kf: return "kf";
    case Method::mlp: return "mlp";
    case Method::gru: return "gru";
    case Method::dcbf_mlp: return "dcbf_mlp";
    case Method::dcbf_gru: return "dcbf_gru";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    for (Method m : kAllMethods) {
        if (to_string(m) == name) {
            return m;
        }
    }
    throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

std::optional<Architecture> method_architecture(Method method) {
    switch (method) {
    case Method::mlp:
    case Method::dcbf_mlp: return Architecture::mlp;
    case Method::gru:
    case Method::dcbf_gru: return Architecture::gru;
    default: return std::nullopt;
    }
}

NmseResult nmse(const std::vector<Vector>& predicted, const std::vector<Vector>& truth) {
    if (predicted.size() != truth.size() || truth.empty()) {
        throw std::invalid_argument("nmse: sequences must be non-empty and of equal length");
    }
    NmseResult out;
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        if (predicted[t].size() != truth[t].size()) {
            throw std::invalid_argument("nmse: vector length mismatch at slot " + std::to_string(t));
        }
        const double power = truth[t].squaredNorm();
        if (power == 0.0) {
            ++out.excluded;
            continue;
        }
        sum += (predicted[t] - truth[t]).squaredNorm() / power;
        ++used;
    }
    if (used == 0) {
        throw std::invalid_argument("nmse: every true vector is zero");
    }
    out.linear = sum / static_cast<double>(used);
    out.db = out.linear > 0.0 ? std::max(kNmseFloorDb, 10.0 * std::log10(out.linear)) : kNmseFloorDb;
    return out;
}

double nmse_db(const std::vector<Vector>& predicted, const std::vector<Vector>& truth) {
    return nmse(predicted, truth).db;
}

std::filesystem::path trace_path(const std::filesystem::path& dir, std::uint64_t seed) {
    return dir / ("trace_seed" + std::to_string(seed) + ".txt");
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, Architecture arch, std::uint64_t seed) {
    return dir / (std::string(to_string(arch)) + "_seed" + std::to_string(seed) + ".ckpt");
}

std::filesystem::path offsets_path(const std::filesystem::path& dir, Architecture arch, std::uint64_t seed) {
    return dir / ("offsets_" + std::string(to_string(arch)) + "_seed" + std::to_string(seed) + ".txt");
}

namespace {

std::uint64_t arch_id(Architecture arch) { return arch == Architecture::mlp ? 1 : 2; }

std::uint64_t power_id(double tx_power_dbm) { return std::bit_cast<std::uint64_t>(tx_power_dbm); }

bool needs(const std::vector<Method>& methods, Architecture arch) {
    return std::any_of(methods.begin(), methods.end(),
                       [arch](Method m) { return method_architecture(m) == arch; });
}

// Slots touched by the training windows.
std::size_t training_end_slot(const ExperimentConfig& config, const DatasetSplit& split) {
    return split.train.end + static_cast<std::size_t>(config.history);
}

} // namespace

ChannelTrace make_trace(const ExperimentConfig& config, std::uint64_t seed) {
    return generate_trace(config.system, config.trace_length, seed, static_cast<std::size_t>(config.history));
}

WindowSet training_windows(const ExperimentConfig& config, const ChannelTrace& trace, const DatasetSplit& split) {
    return make_windows(trace, split.train, config.history);
}

TrainResult train_predictor(const ExperimentConfig& config, const ChannelTrace& trace, const DatasetSplit& split,
                            Architecture arch, std::uint64_t seed) {
    TrainConfig tc = config.training;
    tc.seed = derive_seed(seed, Stream::init, arch_id(arch));
    return train(config.shape(arch), config.levels, make_windows(trace, split.train, config.history),
                 make_windows(trace, split.validation, config.history), tc);
}

WindowSet perturbed_windows(const ExperimentConfig& config, const ChannelTrace& trace, WindowRange range,
                            std::uint64_t seed) {
    return perturb_histories(make_windows(trace, range, config.history), config.calibration_noise_std, seed);
}

Calibration calibrate_predictor(const ExperimentConfig& config, const PredictorParams& params,
                                const ChannelTrace& trace, const DatasetSplit& split, std::uint64_t seed) {
    const WindowSet cal = perturbed_windows(config, trace, split.calibration,
                                            derive_seed(seed, Stream::calibration_noise, arch_id(params.shape.arch)));
    Calibration c;
    c.levels = config.levels;
    c.offsets = fit_offsets(params, config.levels, cal);
    c.bounds = training_bounds(trace, split.train, config.history, config.bounds);
    return c;
}

SeedArtifacts prepare_seed(const ExperimentConfig& config, std::uint64_t seed, const std::vector<Method>& methods,
                           bool reuse_files) {
    config.validate();
    const bool io = !config.output_dir.empty();
    SeedArtifacts a;
    a.seed = seed;
    a.trace = make_trace(config, seed);
    a.split = split_dataset(a.trace.length(), static_cast<std::size_t>(config.history));
    if (std::find(methods.begin(), methods.end(), Method::kf) != methods.end()) {
        a.ar_models = fit_ar(a.trace, 0, training_end_slot(config, a.split), config.kf_order);
    }
    if (io) {
        std::filesystem::create_directories(config.output_dir);
        save_trace(trace_path(config.output_dir, seed), a.trace);
    }
    for (Architecture arch : {Architecture::mlp, Architecture::gru}) {
        if (!needs(methods, arch)) {
            continue;
        }
        const auto ckpt = checkpoint_path(config.output_dir, arch, seed);
        const auto offs = offsets_path(config.output_dir, arch, seed);
        PredictorParams params;
        if (io && reuse_files && std::filesystem::exists(ckpt)) {
            params = load_checkpoint(ckpt);
            const PredictorShape want = config.shape(arch);
            const PredictorShape& got = params.shape;
            if (got.history != want.history || got.links != want.links || got.levels != want.levels ||
                got.hidden != want.hidden || got.layers != want.layers) {
                throw std::runtime_error("checkpoint " + ckpt.string() + " does not match the configuration");
            }
        } else {
            params = train_predictor(config, a.trace, a.split, arch, seed).params;
            if (io) {
                save_checkpoint(ckpt, params);
            }
        }
        Calibration cal;
        if (io && reuse_files && std::filesystem::exists(offs)) {
            cal = load_calibration(offs);
        } else {
            cal = calibrate_predictor(config, params, a.trace, a.split, seed);
            if (io) {
                save_calibration(offs, cal);
            }
        }
        if (arch == Architecture::mlp) {
            a.mlp = std::move(params);
            a.mlp_calibration = std::move(cal);
        } else {
            a.gru = std::move(params);
            a.gru_calibration = std::move(cal);
        }
    }
    return a;
}

ObservationSequence test_observations(const ExperimentConfig& config, const SeedArtifacts& artifacts,
                                      double tx_power_dbm) {
    const std::size_t first = artifacts.split.test.begin;
    const std::size_t end = artifacts.split.test.end + static_cast<std::size_t>(config.history);
    return observe_slots(artifacts.trace, first, end, tx_power_dbm,
                         derive_seed(artifacts.seed, Stream::test_noise, power_id(tx_power_dbm)));
}

std::vector<Vector> predict_method(const ExperimentConfig& config, const SeedArtifacts& a, Method method,
                                   const ObservationSequence& seq) {
    auto model = [&](Architecture arch) -> std::pair<const PredictorParams&, const Calibration&> {
        const auto& params = arch == Architecture::mlp ? a.mlp : a.gru;
        const auto& cal = arch == Architecture::mlp ? a.mlp_calibration : a.gru_calibration;
        if (!params || !cal) {
            throw std::logic_error(std::string(to_string(arch)) + " predictor was not prepared");
        }
        return {*params, *cal};
    };
    switch (method) {
    case Method::outdated:
        return outdated_sequence(seq, config.history);
    case Method::kf:
        if (a.ar_models.empty()) {
            throw std::logic_error("AR models were not prepared");
        }
        return kalman_predict(a.ar_models, seq, config.history);
    case Method::mlp:
    case Method::gru: {
        auto [params, cal] = model(*method_architecture(method));
        return open_loop_predict(params, uncalibrated(cal), seq);
    }
    case Method::dcbf_mlp:
    case Method::dcbf_gru: {
        const Architecture arch = *method_architecture(method);
        auto [params, cal] = model(arch);
        FilterConfig fc;
        fc.samples = config.filter_samples;
        fc.seed = derive_seed(a.seed, Stream::prior_samples, arch_id(arch));
        return dcbf_filter(params, cal, seq, fc).predictions;
    }
    }
    throw std::logic_error("unhandled method");
}

double evaluate_cell(const ExperimentConfig& config, const SeedArtifacts& artifacts, Method method,
                     double tx_power_dbm) {
    const ObservationSequence seq = test_observations(config, artifacts, tx_power_dbm);
    return nmse_db(predict_method(config, artifacts, method, seq), prediction_targets(seq, config.history));
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (workers == 0) {
        workers = std::max(1u, std::thread::hardware_concurrency());
    }
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                fn(i);
            }
        });
    }
}

ExperimentResult run_experiment(const ExperimentConfig& config, bool reuse_files) {
    config.validate();
    const std::size_t n_seeds = config.seeds.size();
    std::vector<std::optional<SeedArtifacts>> artifacts(n_seeds);
    std::vector<std::string> seed_errors(n_seeds);

    parallel_for(n_seeds, config.workers, [&](std::size_t i) {
        try {
            artifacts[i] = prepare_seed(config, config.seeds[i], config.methods, reuse_files);
        } catch (const std::exception& e) {
            seed_errors[i] = e.what();
        }
    });

    const std::size_t n_powers = config.tx_powers_dbm.size();
    const std::size_t n_methods = config.methods.size();
    const std::size_t n_cells = n_seeds * n_powers * n_methods;
    std::vector<std::optional<ResultRow>> cells(n_cells);
    std::vector<std::string> cell_errors(n_cells);

    // One job per (seed, power) so the observation draw is shared by all methods.
    parallel_for(n_seeds * n_powers, config.workers, [&](std::size_t job) {
        const std::size_t si = job / n_powers;
        const std::size_t pi = job % n_powers;
        const double power = config.tx_powers_dbm[pi];
        for (std::size_t mi = 0; mi < n_methods; ++mi) {
            const std::size_t cell = job * n_methods + mi;
            const Method method = config.methods[mi];
            if (!artifacts[si]) {
                cell_errors[cell] = "seed preparation failed: " + seed_errors[si];
                continue;
            }
            try {
                const auto start = std::chrono::steady_clock::now();
                const ObservationSequence seq = test_observations(config, *artifacts[si], power);
                const double db = nmse_db(predict_method(config, *artifacts[si], method, seq),
                                          prediction_targets(seq, config.history));
                const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
                cells[cell] = ResultRow{config.system.speed_kmh, power, method, config.seeds[si], db, elapsed.count()};
            } catch (const std::exception& e) {
                cell_errors[cell] = e.what();
            }
        }
    });

    ExperimentResult result;
    for (std::size_t c = 0; c < n_cells; ++c) {
        if (cells[c]) {
            result.rows.push_back(*cells[c]);
        } else {
            const std::size_t si = c / (n_powers * n_methods);
            const std::size_t pi = (c / n_methods) % n_powers;
            const std::size_t mi = c % n_methods;
            result.failures.push_back("seed " + std::to_string(config.seeds[si]) + ", power " +
                                      format_double(config.tx_powers_dbm[pi]) + " dBm, " +
                                      std::string(to_string(config.methods[mi])) + ": " + cell_errors[c]);
        }
    }
    return result;
}

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << kCsvHeader << '\n';
    for (const ResultRow& r : rows) {
        out << format_double(r.speed_kmh) << ',' << format_double(r.tx_power_dbm) << ',' << to_string(r.method) << ','
            << r.seed << ',' << format_double(r.nmse_db) << ',' << format_double(r.runtime_s) << '\n';
    }
}

std::vector<ResultRow> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError("csv: empty file");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != kCsvHeader) {
        throw FormatError("csv: header must be '" + std::string(kCsvHeader) + "'");
    }
    std::vector<ResultRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                fields.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (fields.size() != 6) {
            throw FormatError("csv: line " + std::to_string(line_no) + " must have 6 fields");
        }
        try {
            ResultRow r;
            r.speed_kmh = parse_double(fields[0]);
            r.tx_power_dbm = parse_double(fields[1]);
            r.method = parse_method(fields[2]);
            r.seed = parse_unsigned(fields[3]);
            r.nmse_db = parse_double(fields[4]);
            r.runtime_s = parse_double(fields[5]);
            rows.push_back(r);
        } catch (const std::exception& e) {
            throw FormatError("csv: line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

std::vector<ReportLine> aggregate(const std::vector<ResultRow>& rows) {
    using Key = std::tuple<double, int, double>;
    std::map<Key, std::vector<double>> groups;
    for (const ResultRow& r : rows) {
        groups[{r.speed_kmh, static_cast<int>(r.method), r.tx_power_dbm}].push_back(r.nmse_db);
    }
    std::vector<ReportLine> lines;
    for (const auto& [key, values] : groups) {
        ReportLine line;
        line.speed_kmh = std::get<0>(key);
        line.method = static_cast<Method>(std::get<1>(key));
        line.tx_power_dbm = std::get<2>(key);
        line.seeds = values.size();
        double sum = 0.0;
        for (double v : values) {
            sum += v;
        }
        line.mean_nmse_db = sum / static_cast<double>(values.size());
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values) {
                ss += (v - line.mean_nmse_db) * (v - line.mean_nmse_db);
            }
            line.std_nmse_db = std::sqrt(ss / static_cast<double>(values.size() - 1));
        }
        lines.push_back(line);
    }
    return lines;
}

void write_report(std::ostream& out, const std::vector<ReportLine>& lines) {
    out << kReportHeader << '\n';
    for (const ReportLine& l : lines) {
        out << format_double(l.speed_kmh) << ',' << to_string(l.method) << ',' << format_double(l.tx_power_dbm) << ','
            << l.seeds << ',' << format_double(l.mean_nmse_db) << ',' << format_double(l.std_nmse_db) << '\n';
    }
}

} // namespace dcbf
