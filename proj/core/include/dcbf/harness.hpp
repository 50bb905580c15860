// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: configuration, the NMSE metric, per-seed model
// preparation, the (seed, power, method) sweep, CSV persistence and the
// aggregate report.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcbf/baselines.hpp"
#include "dcbf/bayes_filter.hpp"
#include "dcbf/channel_sim.hpp"
#include "dcbf/conformal.hpp"
#include "dcbf/quantile_predictor.hpp"

namespace dcbf {

enum class Method { outdated, kf, mlp, gru, dcbf_mlp, dcbf_gru };

inline constexpr std::array<Method, 6> kAllMethods = {Method::outdated, Method::kf,       Method::mlp,
                                                      Method::gru,      Method::dcbf_mlp, Method::dcbf_gru};

std::string_view to_string(Method method);
Method parse_method(std::string_view name);

/// Architecture backing a learned method; nullopt for outdated and kf.
std::optional<Architecture> method_architecture(Method method);

inline constexpr double kNmseFloorDb = -100.0;

struct NmseResult {
    double linear = 0.0;
    double db = kNmseFloorDb;
    std::size_t excluded = 0;  // slots skipped because the true vector was zero
};

/// Mean over slots of ||pred - true||^2 / ||true||^2, in linear and dB
/// (floored at -100 dB).
NmseResult nmse(const std::vector<Vector>& predicted, const std::vector<Vector>& truth);
double nmse_db(const std::vector<Vector>& predicted, const std::vector<Vector>& truth);

struct ExperimentConfig {
    SystemConfig system;
    std::size_t trace_length = 10000;
    std::vector<std::uint64_t> seeds{0};
    std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
    std::vector<double> tx_powers_dbm{-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0};

    int history = 3;
    QuantileLevels levels = QuantileLevels::deciles();
    int mlp_hidden = 64;
    int mlp_layers = 2;
    int gru_hidden = 128;
    int gru_layers = 2;
    TrainConfig training;

    BoundsMode bounds = BoundsMode::per_link;
    /// Std of the Gaussian perturbation applied to calibration histories.
    double calibration_noise_std = 0.05;

    std::size_t filter_samples = 1000;
    int kf_order = 3;

    /// Empty disables artifact files.
    std::filesystem::path output_dir;
    /// 0 selects std::thread::hardware_concurrency().
    std::size_t workers = 0;

    void validate() const;
    PredictorShape shape(Architecture arch) const;
};

/// Key-value config with INI sections:
///   [channel]    bs_antennas ue_antennas carrier_hz slot_s speed_kmh bandwidth_hz
///                thermal_noise_dbm_hz pathloss_db trace_length seeds
///   [experiment] methods tx_power_dbm workers
///   [predictor]  history quantiles mlp_hidden mlp_layers gru_hidden gru_layers
///   [training]   epochs batch_size learning_rate input_noise_std
///   [conformal]  bounds input_noise_std
///   [filter]     samples
///   [kf]         order mode
/// Lists are comma separated. Unknown sections or keys are errors.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one "section.key" = value setting; throws std::invalid_argument.
void apply_setting(ExperimentConfig& config, std::string_view dotted_key, std::string_view value);

/// Serializes a config in the parse_config format.
void write_config(std::ostream& out, const ExperimentConfig& config);

/// Everything derived from one seed before any cell is evaluated.
struct SeedArtifacts {
    std::uint64_t seed = 0;
    ChannelTrace trace;
    DatasetSplit split;
    std::vector<ArModel> ar_models;
    std::optional<PredictorParams> mlp;
    std::optional<PredictorParams> gru;
    std::optional<Calibration> mlp_calibration;
    std::optional<Calibration> gru_calibration;
};

ChannelTrace make_trace(const ExperimentConfig& config, std::uint64_t seed);
WindowSet training_windows(const ExperimentConfig& config, const ChannelTrace& trace, const DatasetSplit& split);
TrainResult train_predictor(const ExperimentConfig& config, const ChannelTrace& trace, const DatasetSplit& split,
                            Architecture arch, std::uint64_t seed);
/// Offsets from perturbed calibration histories plus training-set bounds.
Calibration calibrate_predictor(const ExperimentConfig& config, const PredictorParams& params,
                                const ChannelTrace& trace, const DatasetSplit& split, std::uint64_t seed);
/// Calibration-style perturbed windows over an arbitrary range (used for coverage on the test block).
WindowSet perturbed_windows(const ExperimentConfig& config, const ChannelTrace& trace, WindowRange range,
                            std::uint64_t seed);

/// Observations over the test block shared by all methods of a (seed, power) cell set.
ObservationSequence test_observations(const ExperimentConfig& config, const SeedArtifacts& artifacts,
                                      double tx_power_dbm);

/// Predictions of one method on the test block.
std::vector<Vector> predict_method(const ExperimentConfig& config, const SeedArtifacts& artifacts, Method method,
                                   const ObservationSequence& seq);

/// NMSE in dB of one (seed, power, method) cell.
double evaluate_cell(const ExperimentConfig& config, const SeedArtifacts& artifacts, Method method,
                     double tx_power_dbm);

/// Trace, AR fit and the predictors needed by `methods`. When the output
/// directory already holds matching checkpoints or offsets and reuse is
/// set, they are loaded instead of retrained.
SeedArtifacts prepare_seed(const ExperimentConfig& config, std::uint64_t seed, const std::vector<Method>& methods,
                           bool reuse_files = false);

struct ResultRow {
    double speed_kmh = 0.0;
    double tx_power_dbm = 0.0;
    Method method = Method::outdated;
    std::uint64_t seed = 0;
    double nmse_db = kNmseFloorDb;
    double runtime_s = 0.0;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<std::string> failures;

    bool ok() const { return failures.empty(); }
};

/// Runs every (seed, power, method) cell. Predictors are trained once per
/// seed and shared across powers; rows come back in (seed, power, method)
/// order regardless of worker scheduling. Failed cells are reported and
/// skipped. Checkpoints and offsets are written to config.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config, bool reuse_files = false);

inline constexpr std::string_view kCsvHeader = "speed_kmh,tx_power_dbm,method,seed,nmse_db,runtime_s";

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_csv(std::istream& in);

struct ReportLine {
    double speed_kmh = 0.0;
    Method method = Method::outdated;
    double tx_power_dbm = 0.0;
    std::size_t seeds = 0;
    double mean_nmse_db = 0.0;
    double std_nmse_db = 0.0;  // sample std (n-1); 0 for a single seed
};

/// Groups rows by (speed, method, power), sorted in that order.
std::vector<ReportLine> aggregate(const std::vector<ResultRow>& rows);

inline constexpr std::string_view kReportHeader = "speed_kmh,method,tx_power_dbm,seeds,mean_nmse_db,std_nmse_db";
void write_report(std::ostream& out, const std::vector<ReportLine>& lines);

/// Artifact paths inside the output directory.
std::filesystem::path trace_path(const std::filesystem::path& dir, std::uint64_t seed);
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, Architecture arch, std::uint64_t seed);
std::filesystem::path offsets_path(const std::filesystem::path& dir, Architecture arch, std::uint64_t seed);

/// Runs fn(i) for i in [0, n) on at most `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

} // namespace dcbf
