// SPDX-License-Identifier: Apache-2.0
//
// Conformalized quantile regression on the calibration block and the
// calibrated piecewise-uniform prior built from the shifted quantiles.
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "dcbf/channel_sim.hpp"
#include "dcbf/quantile_predictor.hpp"
#include "dcbf/types.hpp"

namespace dcbf {

/// Conformity scores h_t[l] - q_{l,tau_j}(h_t) for one level j, L x n.
Matrix conformity_scores(const PredictorParams& params, const WindowSet& calibration, std::size_t level);

/// Same, for precomputed network outputs ((L*G) x n).
Matrix conformity_scores(const Matrix& outputs, const Matrix& targets, int levels, std::size_t level);

/// Finite-sample rank k = ceil((n+1) tau), clamped to [1, n].
std::size_t conformal_rank(std::size_t n, double tau);

/// True when ceil((n+1) tau) > n, i.e. the coverage guarantee cannot hold at this n.
bool conformal_rank_clamped(std::size_t n, double tau);

/// The k-th order statistic with k = conformal_rank(n, tau).
double empirical_quantile(std::span<const double> scores, double tau);

struct CalibrationOffsets {
    Matrix gamma;  // L x G
};

/// gamma[l][j] = empirical tau_j-quantile of the level-j scores of link l.
CalibrationOffsets fit_offsets(const PredictorParams& params, const QuantileLevels& levels,
                               const WindowSet& calibration);

enum class BoundsMode { per_link, global };

std::string_view to_string(BoundsMode mode);
BoundsMode parse_bounds_mode(std::string_view name);

/// Values used for the tau_0 = 0 and tau_{G+1} = 1 breakpoints.
struct LinkBounds {
    Vector lower;
    Vector upper;
};

/// Min/max channel values over the slots touched by the training windows.
LinkBounds training_bounds(const ChannelTrace& trace, WindowRange train, int history, BoundsMode mode);

/// L x (G+2): column 0 is the lower bound, columns 1..G the sorted
/// q + gamma values, column G+1 the upper bound. Bounds widen to bracket
/// the interior when needed.
struct CalibratedQuantiles {
    Matrix phi;
};

/// Sorts every row ascending (rearrangement of crossing quantiles).
Matrix monotonize(Matrix values);

/// Interior only: monotonize(q + gamma), L x G.
Matrix calibrated_interior(const QuantileSurface& raw, const CalibrationOffsets& offsets);

CalibratedQuantiles calibrate(const QuantileSurface& raw, const CalibrationOffsets& offsets, const LinkBounds& bounds);

/// Per-link piecewise-uniform distribution with breakpoints b_0..b_{G+1}
/// and interval masses m_g = tau_g - tau_{g-1}. Zero-width intervals are
/// atoms carrying their mass at the shared breakpoint.
class PiecewiseUniformPrior {
public:
    PiecewiseUniformPrior(Matrix breakpoints, std::vector<double> cumulative_levels);

    int links() const { return static_cast<int>(breakpoints_.rows()); }
    int intervals() const { return static_cast<int>(breakpoints_.cols()) - 1; }

    /// b_g for g in 0..G+1.
    double breakpoint(int link, int g) const { return breakpoints_(link, g); }
    /// tau_g for g in 0..G+1 (tau_0 = 0, tau_{G+1} = 1).
    double level(int g) const { return levels_[static_cast<std::size_t>(g)]; }
    /// m_g for g in 1..G+1.
    double mass(int g) const { return levels_[static_cast<std::size_t>(g)] - levels_[static_cast<std::size_t>(g) - 1]; }

    double lower(int link) const { return breakpoints_(link, 0); }
    double upper(int link) const { return breakpoints_(link, breakpoints_.cols() - 1); }

    /// Right-continuous CDF.
    double cdf(int link, double x) const;
    /// Density of the continuous part; atoms are not included.
    double density(int link, double x) const;
    /// Total point mass located exactly at x.
    double atom_mass(int link, double x) const;
    /// Sum_g m_g (b_{g-1} + b_g) / 2.
    double mean(int link) const;
    /// Inverse CDF for u in [0, 1).
    double quantile(int link, double u) const;

    const Matrix& breakpoints() const { return breakpoints_; }

private:
    Matrix breakpoints_;
    std::vector<double> levels_;
};

/// Requires every phi row to be nondecreasing.
PiecewiseUniformPrior build_prior(const CalibratedQuantiles& phi, const QuantileLevels& levels);

/// Fraction of windows with h_t[l] <= phi_{l,tau_j}, per link.
Vector coverage(const PredictorParams& params, const CalibrationOffsets& offsets, const QuantileLevels& levels,
                const WindowSet& test, std::size_t level);

/// Everything needed to turn raw network output into a calibrated prior.
struct Calibration {
    QuantileLevels levels;
    CalibrationOffsets offsets;
    LinkBounds bounds;
};

/// Offsets file, same named-array format as checkpoints:
///   dcbf-offsets
///   array taus 1 G ...
///   array gamma L G ...
///   array lower L 1 ...
///   array upper L 1 ...
void write_calibration(std::ostream& out, const Calibration& calibration);
Calibration read_calibration(std::istream& in);
void save_calibration(const std::filesystem::path& path, const Calibration& calibration);
Calibration load_calibration(const std::filesystem::path& path);

} // namespace dcbf
