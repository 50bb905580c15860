// SPDX-License-Identifier: Apache-2.0
#include "dcbf/quantile_predictor.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dcbf/errors.hpp"
#include "networks.hpp"

namespace dcbf {

QuantileLevels QuantileLevels::deciles() {
    QuantileLevels levels;
    for (int j = 1; j <= 9; ++j) {
        levels.taus.push_back(j / 10.0);
    }
    return levels;
}

void QuantileLevels::validate() const {
    if (taus.empty()) {
        throw std::invalid_argument("QuantileLevels: at least one level required");
    }
    for (std::size_t j = 0; j < taus.size(); ++j) {
        if (!(taus[j] > 0.0 && taus[j] < 1.0)) {
            throw std::invalid_argument("QuantileLevels: levels must lie in (0, 1)");
        }
        if (j > 0 && !(taus[j] > taus[j - 1])) {
            throw std::invalid_argument("QuantileLevels: levels must be strictly increasing");
        }
    }
}

std::string_view to_string(Architecture arch) {
    return arch == Architecture::mlp ? "mlp" : "gru";
}

Architecture parse_architecture(std::string_view name) {
    if (name == "mlp") {
        return Architecture::mlp;
    }
    if (name == "gru") {
        return Architecture::gru;
    }
    throw std::invalid_argument("unknown architecture '" + std::string(name) + "'");
}

PredictorShape PredictorShape::standard(Architecture arch, int links, int levels, int history) {
    PredictorShape shape;
    shape.arch = arch;
    shape.links = links;
    shape.levels = levels;
    shape.history = history;
    shape.layers = 2;
    shape.hidden = arch == Architecture::mlp ? 64 : 128;
    return shape;
}

void ParamSet::add(std::string name, Matrix value) {
    arrays_.push_back({std::move(name), std::move(value)});
}

Matrix& ParamSet::at(std::string_view name) {
    for (auto& a : arrays_) {
        if (a.name == name) {
            return a.value;
        }
    }
    throw std::out_of_range("ParamSet: no array named '" + std::string(name) + "'");
}

const Matrix& ParamSet::at(std::string_view name) const {
    return const_cast<ParamSet*>(this)->at(name);
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out;
    for (const auto& a : arrays_) {
        out.add(a.name, Matrix::Zero(a.value.rows(), a.value.cols()));
    }
    return out;
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& a : arrays_) {
        n += static_cast<std::size_t>(a.value.size());
    }
    return n;
}

bool ParamSet::all_finite() const {
    for (const auto& a : arrays_) {
        if (!a.value.allFinite()) {
            return false;
        }
    }
    return true;
}

namespace detail {

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            m(r, c) = dist(rng);
        }
    }
    return m;
}

} // namespace detail

namespace {

void validate_shape(const PredictorShape& shape) {
    if (shape.history < 1 || shape.links < 1 || shape.levels < 1 || shape.hidden < 1 || shape.layers < 1) {
        throw std::invalid_argument("PredictorShape: all dimensions must be positive");
    }
}

void check_histories(const PredictorParams& params, const Matrix& histories) {
    if (histories.rows() != params.shape.input_width()) {
        throw std::invalid_argument("predictor: history width " + std::to_string(histories.rows()) +
                                    " does not match p*L = " + std::to_string(params.shape.input_width()));
    }
    if (!histories.allFinite()) {
        throw std::invalid_argument("predictor: history must be finite");
    }
}

void check_batch(const PredictorParams& params, const QuantileLevels& levels, const Batch& batch) {
    if (batch.size() == 0) {
        throw std::invalid_argument("loss: empty batch");
    }
    check_histories(params, batch.histories);
    if (batch.targets.rows() != params.shape.links || batch.targets.cols() != batch.histories.cols()) {
        throw std::invalid_argument("loss: targets must be L x B");
    }
    if (static_cast<int>(levels.size()) != params.shape.levels) {
        throw std::invalid_argument("loss: quantile level count does not match the network");
    }
}

// dLoss/dOutputs for the mean pinball loss; 0 exactly at the kink.
Matrix pinball_output_gradient(const Matrix& outputs, const Matrix& targets, const QuantileLevels& levels) {
    const Eigen::Index links = targets.rows();
    const Eigen::Index g = static_cast<Eigen::Index>(levels.size());
    const double scale = 1.0 / static_cast<double>(outputs.cols() * links * g);
    Matrix d(outputs.rows(), outputs.cols());
    for (Eigen::Index b = 0; b < outputs.cols(); ++b) {
        for (Eigen::Index l = 0; l < links; ++l) {
            const double h = targets(l, b);
            for (Eigen::Index j = 0; j < g; ++j) {
                const double q = outputs(l * g + j, b);
                const double tau = levels[static_cast<std::size_t>(j)];
                double slope = 0.0;
                if (q < h) {
                    slope = -tau;
                } else if (q > h) {
                    slope = 1.0 - tau;
                }
                d(l * g + j, b) = slope * scale;
            }
        }
    }
    return d;
}

} // namespace

PredictorParams init_params(const PredictorShape& shape, std::uint64_t seed) {
    validate_shape(shape);
    PredictorParams params;
    params.shape = shape;
    params.seed = seed;
    Rng rng(derive_seed(seed, Stream::init));
    if (shape.arch == Architecture::mlp) {
        detail::mlp_init(params.theta, shape, rng);
    } else {
        detail::gru_init(params.theta, shape, rng);
    }
    return params;
}

Matrix forward_batch(const PredictorParams& params, const Matrix& histories) {
    check_histories(params, histories);
    return params.shape.arch == Architecture::mlp ? detail::mlp_forward(params, histories)
                                                  : detail::gru_forward(params, histories);
}

QuantileSurface to_surface(const Eigen::Ref<const Vector>& column, int links, int levels) {
    QuantileSurface s{Matrix(links, levels)};
    for (int l = 0; l < links; ++l) {
        for (int j = 0; j < levels; ++j) {
            s.q(l, j) = column[l * levels + j];
        }
    }
    return s;
}

QuantileSurface forward(const PredictorParams& params, const Vector& history) {
    Matrix out = forward_batch(params, history);
    return to_surface(out.col(0), params.shape.links, params.shape.levels);
}

double pinball_loss(double h, double q, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw std::invalid_argument("pinball_loss: tau must lie in (0, 1)");
    }
    return q <= h ? tau * (h - q) : (1.0 - tau) * (q - h);
}

double pinball_mean(const Matrix& outputs, const Matrix& targets, const QuantileLevels& levels) {
    const Eigen::Index links = targets.rows();
    const Eigen::Index g = static_cast<Eigen::Index>(levels.size());
    double sum = 0.0;
    for (Eigen::Index b = 0; b < outputs.cols(); ++b) {
        for (Eigen::Index l = 0; l < links; ++l) {
            for (Eigen::Index j = 0; j < g; ++j) {
                sum += pinball_loss(targets(l, b), outputs(l * g + j, b), levels[static_cast<std::size_t>(j)]);
            }
        }
    }
    return sum / static_cast<double>(outputs.cols() * links * g);
}

double total_loss(const PredictorParams& params, const QuantileLevels& levels, const Batch& batch) {
    check_batch(params, levels, batch);
    return pinball_mean(forward_batch(params, batch.histories), batch.targets, levels);
}

LossGradient backward(const PredictorParams& params, const QuantileLevels& levels, const Batch& batch) {
    check_batch(params, levels, batch);
    Matrix outputs = forward_batch(params, batch.histories);
    Matrix d_outputs = pinball_output_gradient(outputs, batch.targets, levels);
    LossGradient result;
    result.loss = pinball_mean(outputs, batch.targets, levels);
    result.gradient = params.shape.arch == Architecture::mlp
                          ? detail::mlp_backward(params, batch.histories, d_outputs)
                          : detail::gru_backward(params, batch.histories, d_outputs);
    return result;
}

WindowSet make_windows(const ChannelTrace& trace, WindowRange range, int history) {
    const int links = trace.links();
    if (range.end + static_cast<std::size_t>(history) > trace.length()) {
        throw std::invalid_argument("make_windows: window range exceeds the trace");
    }
    WindowSet w{Matrix(history * links, static_cast<Eigen::Index>(range.size())),
                Matrix(links, static_cast<Eigen::Index>(range.size()))};
    for (std::size_t i = range.begin; i < range.end; ++i) {
        const auto col = static_cast<Eigen::Index>(i - range.begin);
        for (int s = 0; s < history; ++s) {
            w.histories.col(col).segment(s * links, links) = trace.h[i + s];
        }
        w.targets.col(col) = trace.h[i + history];
    }
    return w;
}

WindowSet perturb_histories(const WindowSet& windows, double noise_std, std::uint64_t seed) {
    WindowSet out = windows;
    if (noise_std > 0.0) {
        Rng rng(seed);
        std::normal_distribution<double> noise(0.0, noise_std);
        for (Eigen::Index c = 0; c < out.histories.cols(); ++c) {
            for (Eigen::Index r = 0; r < out.histories.rows(); ++r) {
                out.histories(r, c) += noise(rng);
            }
        }
    }
    return out;
}

void write_checkpoint(std::ostream& out, const PredictorParams& params) {
    const PredictorShape& s = params.shape;
    out << "dcbf-checkpoint\n"
        << "arch " << to_string(s.arch) << '\n'
        << "history " << s.history << '\n'
        << "links " << s.links << '\n'
        << "levels " << s.levels << '\n'
        << "hidden " << s.hidden << '\n'
        << "layers " << s.layers << '\n'
        << "seed " << params.seed << '\n';
    for (const auto& a : params.theta) {
        write_named_array(out, a);
    }
}

PredictorParams read_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || split_whitespace(line) != std::vector<std::string>{"dcbf-checkpoint"}) {
        throw FormatError("checkpoint: missing 'dcbf-checkpoint' header");
    }
    PredictorShape shape;
    std::uint64_t seed = 0;
    const char* keys[] = {"arch", "history", "links", "levels", "hidden", "layers", "seed"};
    for (const char* key : keys) {
        if (!std::getline(in, line)) {
            throw FormatError(std::string("checkpoint: missing '") + key + "' line");
        }
        auto tokens = split_whitespace(line);
        if (tokens.size() != 2 || tokens[0] != key) {
            throw FormatError(std::string("checkpoint: expected '") + key + " <value>'");
        }
        const std::string& v = tokens[1];
        const std::string k = key;
        if (k == "arch") {
            shape.arch = parse_architecture(v);
        } else if (k == "history") {
            shape.history = static_cast<int>(parse_integer(v));
        } else if (k == "links") {
            shape.links = static_cast<int>(parse_integer(v));
        } else if (k == "levels") {
            shape.levels = static_cast<int>(parse_integer(v));
        } else if (k == "hidden") {
            shape.hidden = static_cast<int>(parse_integer(v));
        } else if (k == "layers") {
            shape.layers = static_cast<int>(parse_integer(v));
        } else {
            seed = parse_unsigned(v);
        }
    }
    // Layout and shapes are checked against a fresh initialization.
    PredictorParams params = init_params(shape, seed);
    std::size_t index = 0;
    while (std::getline(in, line)) {
        if (split_whitespace(line).empty()) {
            continue;
        }
        NamedArray array = parse_named_array(line);
        if (index >= params.theta.size()) {
            throw FormatError("checkpoint: unexpected extra array '" + array.name + "'");
        }
        NamedArray& slot = params.theta[index++];
        if (slot.name != array.name || slot.value.rows() != array.value.rows() ||
            slot.value.cols() != array.value.cols()) {
            throw FormatError("checkpoint: array '" + array.name + "' does not match the declared architecture");
        }
        slot.value = std::move(array.value);
    }
    if (index != params.theta.size()) {
        throw FormatError("checkpoint: missing parameter arrays");
    }
    return params;
}

void save_checkpoint(const std::filesystem::path& path, const PredictorParams& params) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write checkpoint " + path.string());
    }
    write_checkpoint(out, params);
}

PredictorParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open checkpoint " + path.string());
    }
    return read_checkpoint(in);
}

} // namespace dcbf
