// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>
#include <sstream>

#include "dcbf/conformal.hpp"
#include "dcbf/errors.hpp"
#include "oracles.hpp"

using namespace dcbf;

namespace {

QuantileLevels levels_of(std::initializer_list<double> taus) {
    return QuantileLevels{std::vector<double>(taus)};
}

// A network whose every output is zero: conformity scores equal the targets.
PredictorParams zero_network(int links, int levels) {
    PredictorShape s;
    s.links = links;
    s.levels = levels;
    s.hidden = 4;
    PredictorParams p = init_params(s, 0);
    p.theta = p.theta.zeros_like();
    return p;
}

WindowSet iid_windows(int links, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    WindowSet w{Matrix::Zero(3 * links, n), Matrix(links, n)};
    for (auto& v : w.targets.reshaped()) {
        v = normal(rng);
    }
    return w;
}

PiecewiseUniformPrior prior_from_row(std::vector<double> row, std::vector<double> taus) {
    Matrix phi(1, static_cast<Eigen::Index>(row.size()));
    for (std::size_t i = 0; i < row.size(); ++i) {
        phi(0, static_cast<Eigen::Index>(i)) = row[i];
    }
    return build_prior(CalibratedQuantiles{phi}, QuantileLevels{std::move(taus)});
}

} // namespace

TEST_SUITE("conformal") {

TEST_CASE("conformity scores of a perfect and a biased predictor") {
    Matrix targets(2, 4);
    targets << 0.1, 0.2, 0.3, 0.4, -1, -2, -3, -4;
    Matrix outputs(6, 4);  // L = 2, G = 3
    for (int l = 0; l < 2; ++l) {
        for (int j = 0; j < 3; ++j) {
            outputs.row(l * 3 + j) = targets.row(l);
        }
    }
    for (std::size_t j = 0; j < 3; ++j) {
        const Matrix s = conformity_scores(outputs, targets, 3, j);
        CHECK(s.rows() == 2);
        CHECK(s.cols() == 4);
        CHECK(s.isZero(0.0));
    }
    const Matrix biased = outputs.array() + 0.25;
    const Matrix s = conformity_scores(biased, targets, 3, 1);
    CHECK((s.array() + 0.25).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("conformity scores reject empty and mismatched input") {
    CHECK_THROWS_AS(conformity_scores(Matrix(6, 0), Matrix(2, 0), 3, 0), std::invalid_argument);
    CHECK_THROWS_AS(conformity_scores(Matrix(6, 2), Matrix(2, 2), 3, 3), std::invalid_argument);
    CHECK_THROWS_AS(conformity_scores(Matrix(5, 2), Matrix(2, 2), 3, 0), std::invalid_argument);
    const PredictorParams p = zero_network(2, 3);
    CHECK_THROWS_AS(conformity_scores(p, iid_windows(2, 0, 0), 0), std::invalid_argument);
    CHECK(conformity_scores(p, iid_windows(2, 25, 0), 2).cols() == 25);
}

TEST_CASE("finite-sample rank") {
    CHECK(conformal_rank(4, 0.5) == 3);
    CHECK(conformal_rank(9, 0.7) == 7);
    CHECK(conformal_rank(1000, 0.9) == 901);
    CHECK(conformal_rank(5, 0.9) == 5);
    CHECK(conformal_rank_clamped(5, 0.9));
    CHECK_FALSE(conformal_rank_clamped(1000, 0.9));
    CHECK(conformal_rank(1, 0.01) == 1);
}

TEST_CASE("empirical quantile examples") {
    const std::vector<double> s{-1, 0, 1, 2};
    CHECK(empirical_quantile(s, 0.5) == 1.0);
    const std::vector<double> same(7, 0.125);
    for (double tau : {0.05, 0.5, 0.95}) {
        CHECK(empirical_quantile(same, tau) == 0.125);
    }
    const std::vector<double> one{3.5};
    CHECK(empirical_quantile(one, 0.1) == 3.5);
    CHECK(empirical_quantile(one, 0.9) == 3.5);
    CHECK_THROWS_AS(empirical_quantile(std::vector<double>{}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(empirical_quantile(s, 1.0), std::invalid_argument);
}

TEST_CASE("empirical quantile equals the brute-force order statistic") {
    const std::vector<double> alphabet{-1, 0, 1, 2};
    std::size_t lists = 0;
    std::size_t mismatches = 0;
    for (int n = 1; n <= 6; ++n) {
        std::vector<int> digits(static_cast<std::size_t>(n), 0);
        while (true) {
            std::vector<double> values;
            for (int d : digits) {
                values.push_back(alphabet[static_cast<std::size_t>(d)]);
            }
            for (long j = 1; j <= 9; ++j) {
                if (empirical_quantile(values, static_cast<double>(j) / 10.0) !=
                    oracle::brute_force_quantile(values, j, 10)) {
                    ++mismatches;
                }
            }
            ++lists;
            int pos = 0;
            while (pos < n && ++digits[static_cast<std::size_t>(pos)] == 4) {
                digits[static_cast<std::size_t>(pos)] = 0;
                ++pos;
            }
            if (pos == n) {
                break;
            }
        }
    }
    CHECK(lists == 4 + 16 + 64 + 256 + 1024 + 4096);
    CHECK(mismatches == 0);
}

TEST_CASE("calibrate shifts, sorts and attaches bounds") {
    QuantileSurface raw{(Matrix(1, 3) << 0.1, 0.2, 0.3).finished()};
    LinkBounds bounds{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
    CalibrationOffsets zero{Matrix::Zero(1, 3)};
    CalibratedQuantiles c = calibrate(raw, zero, bounds);
    CHECK(c.phi.cols() == 5);
    CHECK(c.phi(0, 0) == -1.0);
    CHECK(c.phi(0, 4) == 1.0);
    CHECK(c.phi.block(0, 1, 1, 3) == raw.q);

    QuantileSurface shifted{(Matrix(1, 3) << 0.3, 0.4, 0.5).finished()};
    CalibrationOffsets tenth{Matrix::Constant(1, 3, 0.1)};
    c = calibrate(shifted, tenth, bounds);
    CHECK(c.phi(0, 1) == doctest::Approx(0.4));
    CHECK(c.phi(0, 3) == doctest::Approx(0.6));

    QuantileSurface crossing{(Matrix(1, 2) << 0.2, 0.1).finished()};
    c = calibrate(crossing, CalibrationOffsets{Matrix::Zero(1, 2)}, bounds);
    CHECK(c.phi(0, 1) == 0.1);
    CHECK(c.phi(0, 2) == 0.2);
}

TEST_CASE("monotonize sorts each row independently") {
    Matrix m(2, 3);
    m << 3, 1, 2, -1, -3, -2;
    const Matrix s = monotonize(m);
    CHECK(s == (Matrix(2, 3) << 1, 2, 3, -3, -2, -1).finished());
}

TEST_CASE("bounds widen to bracket escaping interior values") {
    QuantileSurface raw{(Matrix(1, 2) << -2.0, 3.0).finished()};
    LinkBounds bounds{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
    const CalibratedQuantiles c = calibrate(raw, CalibrationOffsets{Matrix::Zero(1, 2)}, bounds);
    CHECK(c.phi(0, 0) == -2.0);
    CHECK(c.phi(0, 3) == 3.0);
}

TEST_CASE("calibrate is equivariant to a constant shift of the raw quantiles") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix q(4, 5);
    Matrix g(4, 5);
    for (auto& v : q.reshaped()) {
        v = normal(rng);
    }
    for (auto& v : g.reshaped()) {
        v = 0.3 * normal(rng);
    }
    LinkBounds bounds{Vector::Constant(4, -10.0), Vector::Constant(4, 10.0)};
    const CalibratedQuantiles a = calibrate(QuantileSurface{q}, CalibrationOffsets{g}, bounds);
    const CalibratedQuantiles b = calibrate(QuantileSurface{q.array() + 0.75}, CalibrationOffsets{g}, bounds);
    const Matrix diff = b.phi.middleCols(1, 5) - a.phi.middleCols(1, 5);
    CHECK((diff.array() - 0.75).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("calibrate rejects mismatched or non-finite input") {
    QuantileSurface raw{Matrix::Zero(2, 3)};
    LinkBounds bounds{Vector::Zero(2), Vector::Ones(2)};
    CHECK_THROWS_AS(calibrate(raw, CalibrationOffsets{Matrix::Zero(2, 2)}, bounds), std::invalid_argument);
    CalibrationOffsets bad{Matrix::Zero(2, 3)};
    bad.gamma(1, 1) = std::nan("");
    CHECK_THROWS_AS(calibrate(raw, bad, bounds), std::invalid_argument);
    CHECK_THROWS_AS(calibrate(raw, CalibrationOffsets{Matrix::Zero(2, 3)}, LinkBounds{Vector::Zero(1), Vector::Ones(1)}),
                    std::invalid_argument);
}

TEST_CASE("training bounds per link and global") {
    ChannelTrace trace;
    trace.config.bs_antennas = 1;
    trace.config.ue_antennas = 1;
    for (int t = 0; t < 20; ++t) {
        trace.h.push_back((Vector(2) << t, 100 - t).finished());
    }
    const LinkBounds per = training_bounds(trace, WindowRange{2, 6}, 3, BoundsMode::per_link);
    CHECK(per.lower[0] == 2.0);
    CHECK(per.upper[0] == 8.0);
    CHECK(per.lower[1] == 92.0);
    CHECK(per.upper[1] == 98.0);
    const LinkBounds global = training_bounds(trace, WindowRange{2, 6}, 3, BoundsMode::global);
    CHECK(global.lower[1] == 2.0);
    CHECK(global.upper[0] == 98.0);
    CHECK(parse_bounds_mode(to_string(BoundsMode::global)) == BoundsMode::global);
    CHECK_THROWS_AS(parse_bounds_mode("local"), std::invalid_argument);
}

TEST_CASE("uniform special case has unit density") {
    const auto taus = QuantileLevels::deciles().taus;
    std::vector<double> row{0.0};
    row.insert(row.end(), taus.begin(), taus.end());
    row.push_back(1.0);
    const PiecewiseUniformPrior p = prior_from_row(row, taus);
    for (double x : {0.01, 0.15, 0.5, 0.77, 0.99}) {
        CHECK(p.density(0, x) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p.cdf(0, x) == doctest::Approx(x).epsilon(1e-12));
    }
    CHECK(p.density(0, -0.1) == 0.0);
    CHECK(p.density(0, 1.1) == 0.0);
    CHECK(p.mean(0) == doctest::Approx(0.5));
}

TEST_CASE("two halves of unit mass") {
    const PiecewiseUniformPrior p = prior_from_row({0.0, 0.5, 1.0}, {0.5});
    CHECK(p.intervals() == 2);
    CHECK(p.mass(1) == 0.5);
    CHECK(p.mass(2) == 0.5);
    CHECK(p.density(0, 0.25) == doctest::Approx(1.0));
    CHECK(p.density(0, 0.75) == doctest::Approx(1.0));
}

TEST_CASE("prior masses integrate to one for random monotone breakpoints") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const auto taus = QuantileLevels::deciles().taus;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> row(11);
        for (double& v : row) {
            v = u(rng);
        }
        if (trial % 3 == 0) {
            row[4] = row[5];  // force an atom
        }
        std::sort(row.begin(), row.end());
        const PiecewiseUniformPrior p = prior_from_row(row, taus);
        double total = 0.0;
        const int cells = 200000;
        const double width = (row.back() - row.front()) / cells;
        for (int i = 0; i < cells; ++i) {
            total += p.density(0, row.front() + (i + 0.5) * width) * width;
        }
        double atoms = 0.0;
        for (std::size_t g = 0; g < row.size(); ++g) {
            if (g == 0 || row[g] != row[g - 1]) {
                atoms += p.atom_mass(0, row[g]);
            }
        }
        CHECK(total + atoms == doctest::Approx(1.0).epsilon(2e-3));
        double masses = 0.0;
        for (int g = 1; g <= p.intervals(); ++g) {
            masses += p.mass(g);
        }
        CHECK(masses == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("prior CDF hits every level at its breakpoint") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto taus = QuantileLevels::deciles().taus;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> row(11);
        for (double& v : row) {
            v = u(rng);
        }
        std::sort(row.begin(), row.end());
        const PiecewiseUniformPrior p = prior_from_row(row, taus);
        for (int g = 0; g <= 10; ++g) {
            CHECK(std::abs(p.cdf(0, row[static_cast<std::size_t>(g)]) - p.level(g)) <= 1e-12);
        }
    }
}

TEST_CASE("atoms make the CDF jump and stay right-continuous") {
    // b = [0, 0.5, 0.5, 1] with masses 0.3, 0.4, 0.3: an atom of 0.4 at 0.5.
    const PiecewiseUniformPrior p = prior_from_row({0.0, 0.5, 0.5, 1.0}, {0.3, 0.7});
    CHECK(p.atom_mass(0, 0.5) == doctest::Approx(0.4));
    CHECK(p.atom_mass(0, 0.25) == 0.0);
    CHECK(p.cdf(0, 0.5) == doctest::Approx(0.7));
    CHECK(p.cdf(0, std::nextafter(0.5, 0.0)) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(p.cdf(0, std::nextafter(0.5, 1.0)) == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(p.cdf(0, 1.0) == 1.0);
    CHECK(p.cdf(0, -0.01) == 0.0);
    CHECK(p.quantile(0, 0.5) == 0.5);

    const PiecewiseUniformPrior point = prior_from_row({2.0, 2.0, 2.0}, {0.5});
    CHECK(point.cdf(0, 2.0) == 1.0);
    CHECK(point.cdf(0, 1.999) == 0.0);
    CHECK(point.mean(0) == 2.0);
}

TEST_CASE("prior CDF is nondecreasing") {
    const PiecewiseUniformPrior p = prior_from_row({-1.0, -0.2, -0.2, 0.1, 0.4, 2.0}, {0.1, 0.4, 0.6, 0.95});
    double last = -1.0;
    for (int i = 0; i <= 3000; ++i) {
        const double x = -1.5 + 4.0 * i / 3000.0;
        const double c = p.cdf(0, x);
        CHECK(c >= last);
        last = c;
    }
}

TEST_CASE("build_prior rejects non-monotone rows") {
    CHECK_THROWS_AS(prior_from_row({0.0, 0.6, 0.5, 1.0}, {0.3, 0.7}), std::invalid_argument);
}

TEST_CASE("coverage limits for extreme offsets") {
    const PredictorParams p = zero_network(2, 3);
    const QuantileLevels levels = levels_of({0.1, 0.5, 0.9});
    const WindowSet test = iid_windows(2, 200, 5);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(coverage(p, CalibrationOffsets{Matrix::Constant(2, 3, 1e6)}, levels, test, j).minCoeff() == 1.0);
        CHECK(coverage(p, CalibrationOffsets{Matrix::Constant(2, 3, -1e6)}, levels, test, j).maxCoeff() == 0.0);
    }
}

TEST_CASE("calibrated coverage at 0.9 on i.i.d. data") {
    // Each link is checked exactly against an independent count; the 0.87
    // bound applies to the mean over draws, since a single draw also carries
    // calibration-set variance that the binomial slack does not cover.
    const PredictorParams p = zero_network(4, 9);
    const QuantileLevels levels = QuantileLevels::deciles();
    double sum = 0.0;
    int count = 0;
    for (std::uint64_t draw = 0; draw < 5; ++draw) {
        const WindowSet cal = iid_windows(4, 1000, 100 + 2 * draw);
        const WindowSet test = iid_windows(4, 1000, 101 + 2 * draw);
        const Vector c = coverage(p, fit_offsets(p, levels, cal), levels, test, 8);
        for (Eigen::Index l = 0; l < 4; ++l) {
            std::vector<double> scores;
            for (Eigen::Index t = 0; t < cal.size(); ++t) {
                scores.push_back(cal.targets(l, t));
            }
            const double gamma = oracle::brute_force_quantile(scores, 9, 10);
            int hits = 0;
            for (Eigen::Index t = 0; t < test.size(); ++t) {
                hits += test.targets(l, t) <= gamma ? 1 : 0;
            }
            CHECK(c[l] == doctest::Approx(hits / 1000.0).epsilon(1e-12));
            sum += c[l];
            ++count;
        }
    }
    CHECK(sum / count >= 0.87);
}

TEST_CASE("coverage is monotone in tau") {
    const PredictorParams p = zero_network(4, 9);
    const QuantileLevels levels = QuantileLevels::deciles();
    const WindowSet cal = iid_windows(4, 1000, 31);
    const WindowSet test = iid_windows(4, 1000, 32);
    const CalibrationOffsets offsets = fit_offsets(p, levels, cal);
    Vector last = Vector::Zero(4);
    for (std::size_t j = 0; j < 9; ++j) {
        const Vector c = coverage(p, offsets, levels, test, j);
        CHECK((c.array() >= last.array()).all());
        last = c;
    }
    // With a zero network the offsets are the calibration quantiles themselves.
    std::vector<double> link0;
    for (Eigen::Index t = 0; t < cal.size(); ++t) {
        link0.push_back(cal.targets(0, t));
    }
    CHECK(offsets.gamma(0, 4) == oracle::brute_force_quantile(link0, 5, 10));
}

TEST_CASE("offsets file round trip") {
    Calibration c{levels_of({0.25, 0.75}), CalibrationOffsets{(Matrix(2, 2) << 0.1, -0.2, 1.0 / 3.0, 4e-17).finished()},
                  LinkBounds{(Vector(2) << -1.5, -2.5).finished(), (Vector(2) << 1.5, 2.5).finished()}};
    std::stringstream buffer;
    write_calibration(buffer, c);
    const Calibration d = read_calibration(buffer);
    CHECK(d.levels.taus == c.levels.taus);
    CHECK(d.offsets.gamma == c.offsets.gamma);
    CHECK(d.bounds.lower == c.bounds.lower);
    CHECK(d.bounds.upper == c.bounds.upper);
    std::istringstream bad("dcbf-offsets\narray taus 1 2 0.25\n");
    CHECK_THROWS_AS(read_calibration(bad), FormatError);
}

} // TEST_SUITE
