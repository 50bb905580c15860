// SPDX-License-Identifier: Apache-2.0
#include "dcbf/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "dcbf/errors.hpp"
#include "dcbf/text_io.hpp"

namespace dcbf {

Matrix conformity_scores(const Matrix& outputs, const Matrix& targets, int levels, std::size_t level) {
    if (targets.cols() == 0) {
        throw std::invalid_argument("conformity_scores: empty calibration set");
    }
    if (level >= static_cast<std::size_t>(levels) || outputs.rows() != targets.rows() * levels ||
        outputs.cols() != targets.cols()) {
        throw std::invalid_argument("conformity_scores: shape mismatch");
    }
    const Eigen::Index links = targets.rows();
    Matrix scores(links, targets.cols());
    for (Eigen::Index l = 0; l < links; ++l) {
        scores.row(l) = targets.row(l) - outputs.row(l * levels + static_cast<Eigen::Index>(level));
    }
    return scores;
}

Matrix conformity_scores(const PredictorParams& params, const WindowSet& calibration, std::size_t level) {
    if (calibration.size() == 0) {
        throw std::invalid_argument("conformity_scores: empty calibration set");
    }
    return conformity_scores(forward_batch(params, calibration.histories), calibration.targets, params.shape.levels,
                             level);
}

namespace {

double rank_real(std::size_t n, double tau) {
    // Absorb representation error so that e.g. 10 * 0.7 ranks as 7.
    const double x = static_cast<double>(n + 1) * tau;
    return std::ceil(x - 1e-9 * std::max(1.0, x));
}

} // namespace

std::size_t conformal_rank(std::size_t n, double tau) {
    if (n == 0) {
        throw std::invalid_argument("conformal_rank: n must be positive");
    }
    const double k = rank_real(n, tau);
    return static_cast<std::size_t>(std::clamp(k, 1.0, static_cast<double>(n)));
}

bool conformal_rank_clamped(std::size_t n, double tau) {
    return rank_real(n, tau) > static_cast<double>(n);
}

double empirical_quantile(std::span<const double> scores, double tau) {
    if (scores.empty()) {
        throw std::invalid_argument("empirical_quantile: empty score list");
    }
    if (!(tau > 0.0 && tau < 1.0)) {
        throw std::invalid_argument("empirical_quantile: tau must lie in (0, 1)");
    }
    std::vector<double> sorted(scores.begin(), scores.end());
    const std::size_t k = conformal_rank(sorted.size(), tau);
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
    return sorted[k - 1];
}

CalibrationOffsets fit_offsets(const PredictorParams& params, const QuantileLevels& levels,
                               const WindowSet& calibration) {
    levels.validate();
    if (static_cast<int>(levels.size()) != params.shape.levels) {
        throw std::invalid_argument("fit_offsets: quantile level count does not match the network");
    }
    if (calibration.size() == 0) {
        throw std::invalid_argument("fit_offsets: empty calibration set");
    }
    const Matrix outputs = forward_batch(params, calibration.histories);
    const int links = params.shape.links;
    const int g = params.shape.levels;
    CalibrationOffsets offsets{Matrix(links, g)};
    std::vector<double> buffer(static_cast<std::size_t>(calibration.size()));
    for (int j = 0; j < g; ++j) {
        const Matrix scores = conformity_scores(outputs, calibration.targets, g, static_cast<std::size_t>(j));
        for (int l = 0; l < links; ++l) {
            for (Eigen::Index t = 0; t < scores.cols(); ++t) {
                buffer[static_cast<std::size_t>(t)] = scores(l, t);
            }
            offsets.gamma(l, j) = empirical_quantile(buffer, levels[static_cast<std::size_t>(j)]);
        }
    }
    return offsets;
}

std::string_view to_string(BoundsMode mode) {
    return mode == BoundsMode::per_link ? "per_link" : "global";
}

BoundsMode parse_bounds_mode(std::string_view name) {
    if (name == "per_link") {
        return BoundsMode::per_link;
    }
    if (name == "global") {
        return BoundsMode::global;
    }
    throw std::invalid_argument("unknown bounds mode '" + std::string(name) + "'");
}

LinkBounds training_bounds(const ChannelTrace& trace, WindowRange train, int history, BoundsMode mode) {
    const std::size_t last = train.end + static_cast<std::size_t>(history);
    if (train.size() == 0 || last > trace.length()) {
        throw std::invalid_argument("training_bounds: training range is empty or exceeds the trace");
    }
    LinkBounds b{trace.h[train.begin], trace.h[train.begin]};
    for (std::size_t t = train.begin; t < last; ++t) {
        b.lower = b.lower.cwiseMin(trace.h[t]);
        b.upper = b.upper.cwiseMax(trace.h[t]);
    }
    if (mode == BoundsMode::global) {
        b.lower.setConstant(b.lower.minCoeff());
        b.upper.setConstant(b.upper.maxCoeff());
    }
    return b;
}

Matrix monotonize(Matrix values) {
    for (Eigen::Index l = 0; l < values.rows(); ++l) {
        Vector row = values.row(l).transpose();
        std::sort(row.data(), row.data() + row.size());
        values.row(l) = row.transpose();
    }
    return values;
}

Matrix calibrated_interior(const QuantileSurface& raw, const CalibrationOffsets& offsets) {
    if (raw.q.rows() != offsets.gamma.rows() || raw.q.cols() != offsets.gamma.cols()) {
        throw std::invalid_argument("calibrate: raw quantiles and offsets differ in shape");
    }
    if (!raw.q.allFinite() || !offsets.gamma.allFinite()) {
        throw std::invalid_argument("calibrate: non-finite quantiles or offsets");
    }
    return monotonize(raw.q + offsets.gamma);
}

CalibratedQuantiles calibrate(const QuantileSurface& raw, const CalibrationOffsets& offsets, const LinkBounds& bounds) {
    const Matrix interior = calibrated_interior(raw, offsets);
    const Eigen::Index links = interior.rows();
    const Eigen::Index g = interior.cols();
    if (bounds.lower.size() != links || bounds.upper.size() != links) {
        throw std::invalid_argument("calibrate: bounds must have one entry per link");
    }
    if (!bounds.lower.allFinite() || !bounds.upper.allFinite()) {
        throw std::invalid_argument("calibrate: non-finite bounds");
    }
    CalibratedQuantiles out{Matrix(links, g + 2)};
    out.phi.middleCols(1, g) = interior;
    for (Eigen::Index l = 0; l < links; ++l) {
        out.phi(l, 0) = std::min(bounds.lower[l], interior(l, 0));
        out.phi(l, g + 1) = std::max(bounds.upper[l], interior(l, g - 1));
    }
    return out;
}

PiecewiseUniformPrior::PiecewiseUniformPrior(Matrix breakpoints, std::vector<double> cumulative_levels)
    : breakpoints_(std::move(breakpoints)), levels_(std::move(cumulative_levels)) {
    if (breakpoints_.cols() < 2 || static_cast<Eigen::Index>(levels_.size()) != breakpoints_.cols()) {
        throw std::invalid_argument("PiecewiseUniformPrior: need G+2 breakpoints and levels");
    }
}

double PiecewiseUniformPrior::cdf(int link, double x) const {
    const int n = intervals();
    if (x < lower(link)) {
        return 0.0;
    }
    if (x >= upper(link)) {
        return 1.0;
    }
    double total = 0.0;
    for (int g = 1; g <= n; ++g) {
        const double a = breakpoints_(link, g - 1);
        const double b = breakpoints_(link, g);
        if (x >= b) {
            total += mass(g);
        } else if (x > a) {
            total += mass(g) * (x - a) / (b - a);
        }
    }
    return std::min(total, 1.0);
}

double PiecewiseUniformPrior::density(int link, double x) const {
    for (int g = 1; g <= intervals(); ++g) {
        const double a = breakpoints_(link, g - 1);
        const double b = breakpoints_(link, g);
        if (b > a && x >= a && x < b) {
            return mass(g) / (b - a);
        }
    }
    // Right end of the support belongs to the last non-degenerate interval.
    for (int g = intervals(); g >= 1; --g) {
        const double a = breakpoints_(link, g - 1);
        const double b = breakpoints_(link, g);
        if (b > a) {
            return x == b ? mass(g) / (b - a) : 0.0;
        }
    }
    return 0.0;
}

double PiecewiseUniformPrior::atom_mass(int link, double x) const {
    double total = 0.0;
    for (int g = 1; g <= intervals(); ++g) {
        if (breakpoints_(link, g - 1) == breakpoints_(link, g) && breakpoints_(link, g) == x) {
            total += mass(g);
        }
    }
    return total;
}

double PiecewiseUniformPrior::mean(int link) const {
    double total = 0.0;
    for (int g = 1; g <= intervals(); ++g) {
        total += mass(g) * 0.5 * (breakpoints_(link, g - 1) + breakpoints_(link, g));
    }
    return total;
}

double PiecewiseUniformPrior::quantile(int link, double u) const {
    const int n = intervals();
    for (int g = 1; g <= n; ++g) {
        if (u < levels_[static_cast<std::size_t>(g)] || g == n) {
            const double m = mass(g);
            const double a = breakpoints_(link, g - 1);
            const double b = breakpoints_(link, g);
            if (!(m > 0.0) || b == a) {
                return b;
            }
            const double frac = std::clamp((u - levels_[static_cast<std::size_t>(g) - 1]) / m, 0.0, 1.0);
            return a + frac * (b - a);
        }
    }
    return upper(link);
}

PiecewiseUniformPrior build_prior(const CalibratedQuantiles& phi, const QuantileLevels& levels) {
    levels.validate();
    if (phi.phi.cols() != static_cast<Eigen::Index>(levels.size()) + 2) {
        throw std::invalid_argument("build_prior: phi must have G+2 columns");
    }
    if (!phi.phi.allFinite()) {
        throw std::invalid_argument("build_prior: non-finite breakpoints");
    }
    for (Eigen::Index l = 0; l < phi.phi.rows(); ++l) {
        for (Eigen::Index g = 1; g < phi.phi.cols(); ++g) {
            if (phi.phi(l, g) < phi.phi(l, g - 1)) {
                throw std::invalid_argument("build_prior: breakpoints of link " + std::to_string(l) +
                                            " are not monotone; monotonize with calibrate first");
            }
        }
    }
    std::vector<double> cumulative;
    cumulative.reserve(levels.size() + 2);
    cumulative.push_back(0.0);
    cumulative.insert(cumulative.end(), levels.taus.begin(), levels.taus.end());
    cumulative.push_back(1.0);
    return PiecewiseUniformPrior(phi.phi, std::move(cumulative));
}

Vector coverage(const PredictorParams& params, const CalibrationOffsets& offsets, const QuantileLevels& levels,
                const WindowSet& test, std::size_t level) {
    if (test.size() == 0) {
        throw std::invalid_argument("coverage: empty test set");
    }
    if (level >= levels.size()) {
        throw std::invalid_argument("coverage: level index out of range");
    }
    const Matrix outputs = forward_batch(params, test.histories);
    const int links = params.shape.links;
    const int g = params.shape.levels;
    Vector hits = Vector::Zero(links);
    for (Eigen::Index t = 0; t < test.size(); ++t) {
        const Matrix phi = calibrated_interior(to_surface(outputs.col(t), links, g), offsets);
        for (int l = 0; l < links; ++l) {
            if (test.targets(l, t) <= phi(l, static_cast<Eigen::Index>(level))) {
                hits[l] += 1.0;
            }
        }
    }
    return hits / static_cast<double>(test.size());
}

void write_calibration(std::ostream& out, const Calibration& c) {
    out << "dcbf-offsets\n";
    Matrix taus(1, static_cast<Eigen::Index>(c.levels.size()));
    for (std::size_t j = 0; j < c.levels.size(); ++j) {
        taus(0, static_cast<Eigen::Index>(j)) = c.levels[j];
    }
    write_named_array(out, {"taus", taus});
    write_named_array(out, {"gamma", c.offsets.gamma});
    write_named_array(out, {"lower", c.bounds.lower});
    write_named_array(out, {"upper", c.bounds.upper});
}

Calibration read_calibration(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || split_whitespace(line) != std::vector<std::string>{"dcbf-offsets"}) {
        throw FormatError("offsets: missing 'dcbf-offsets' header");
    }
    Calibration c;
    bool seen[4] = {false, false, false, false};
    while (std::getline(in, line)) {
        if (split_whitespace(line).empty()) {
            continue;
        }
        NamedArray a = parse_named_array(line);
        if (a.name == "taus") {
            c.levels.taus.assign(a.value.data(), a.value.data() + a.value.size());
            seen[0] = true;
        } else if (a.name == "gamma") {
            c.offsets.gamma = std::move(a.value);
            seen[1] = true;
        } else if (a.name == "lower") {
            c.bounds.lower = a.value.reshaped();
            seen[2] = true;
        } else if (a.name == "upper") {
            c.bounds.upper = a.value.reshaped();
            seen[3] = true;
        } else {
            throw FormatError("offsets: unknown array '" + a.name + "'");
        }
    }
    if (!(seen[0] && seen[1] && seen[2] && seen[3])) {
        throw FormatError("offsets: file must contain taus, gamma, lower and upper");
    }
    c.levels.validate();
    const Eigen::Index links = c.offsets.gamma.rows();
    if (c.offsets.gamma.cols() != static_cast<Eigen::Index>(c.levels.size()) || c.bounds.lower.size() != links ||
        c.bounds.upper.size() != links) {
        throw FormatError("offsets: inconsistent array shapes");
    }
    return c;
}

void save_calibration(const std::filesystem::path& path, const Calibration& calibration) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write offsets file " + path.string());
    }
    write_calibration(out, calibration);
}

Calibration load_calibration(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open offsets file " + path.string());
    }
    return read_calibration(in);
}

} // namespace dcbf
