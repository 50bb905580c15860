// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dcbf/errors.hpp"
#include "dcbf/harness.hpp"
#include "dcbf/text_io.hpp"

namespace dcbf {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view value) {
    std::vector<std::string> items;
    std::string current;
    for (char c : value) {
        if (c == ',') {
            items.push_back(trim(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    items.push_back(trim(current));
    for (const auto& item : items) {
        if (item.empty()) {
            throw std::invalid_argument("empty element in list '" + std::string(value) + "'");
        }
    }
    return items;
}

double to_real(std::string_view v) { return parse_double(trim(v)); }

int to_int(std::string_view v) { return static_cast<int>(parse_integer(trim(v))); }

std::size_t to_count(std::string_view v) {
    const long long n = parse_integer(trim(v));
    if (n < 0) {
        throw std::invalid_argument("expected a non-negative count, got '" + std::string(v) + "'");
    }
    return static_cast<std::size_t>(n);
}

template <class T, class F>
std::string join(const std::vector<T>& items, F&& fmt) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += fmt(items[i]);
    }
    return out;
}

} // namespace

void ExperimentConfig::validate() const {
    system.validate();
    levels.validate();
    training.validate();
    if (seeds.empty() || methods.empty() || tx_powers_dbm.empty()) {
        throw std::invalid_argument("config: seeds, methods and tx_power_dbm must be non-empty");
    }
    if (history < 1 || kf_order < 1 || filter_samples < 1) {
        throw std::invalid_argument("config: history, kf order and filter samples must be positive");
    }
    if (trace_length < static_cast<std::size_t>(history) + 10) {
        throw std::invalid_argument("config: trace_length must give at least 10 windows");
    }
    if (mlp_hidden < 1 || mlp_layers < 1 || gru_hidden < 1 || gru_layers < 1) {
        throw std::invalid_argument("config: network sizes must be positive");
    }
    if (!(calibration_noise_std >= 0.0)) {
        throw std::invalid_argument("config: conformal.input_noise_std must be non-negative");
    }
}

PredictorShape ExperimentConfig::shape(Architecture arch) const {
    PredictorShape s;
    s.arch = arch;
    s.history = history;
    s.links = system.links();
    s.levels = static_cast<int>(levels.size());
    s.hidden = arch == Architecture::mlp ? mlp_hidden : gru_hidden;
    s.layers = arch == Architecture::mlp ? mlp_layers : gru_layers;
    return s;
}

void apply_setting(ExperimentConfig& c, std::string_view dotted_key, std::string_view value) {
    const std::string key(dotted_key);
    const std::string v = trim(value);
    if (key == "channel.bs_antennas") {
        c.system.bs_antennas = to_int(v);
    } else if (key == "channel.ue_antennas") {
        c.system.ue_antennas = to_int(v);
    } else if (key == "channel.carrier_hz") {
        c.system.carrier_hz = to_real(v);
    } else if (key == "channel.slot_s") {
        c.system.slot_s = to_real(v);
    } else if (key == "channel.speed_kmh") {
        c.system.speed_kmh = to_real(v);
    } else if (key == "channel.bandwidth_hz") {
        c.system.bandwidth_hz = to_real(v);
    } else if (key == "channel.thermal_noise_dbm_hz") {
        c.system.thermal_noise_dbm_hz = to_real(v);
    } else if (key == "channel.pathloss_db") {
        c.system.pathloss_db = to_real(v);
    } else if (key == "channel.trace_length") {
        c.trace_length = to_count(v);
    } else if (key == "channel.seeds") {
        c.seeds.clear();
        for (const auto& s : split_list(v)) {
            c.seeds.push_back(parse_unsigned(trim(s)));
        }
    } else if (key == "experiment.methods") {
        c.methods.clear();
        for (const auto& m : split_list(v)) {
            c.methods.push_back(parse_method(m));
        }
    } else if (key == "experiment.tx_power_dbm") {
        c.tx_powers_dbm.clear();
        for (const auto& p : split_list(v)) {
            c.tx_powers_dbm.push_back(to_real(p));
        }
    } else if (key == "experiment.workers") {
        c.workers = to_count(v);
    } else if (key == "predictor.history") {
        c.history = to_int(v);
    } else if (key == "predictor.quantiles") {
        c.levels.taus.clear();
        for (const auto& t : split_list(v)) {
            c.levels.taus.push_back(to_real(t));
        }
    } else if (key == "predictor.mlp_hidden") {
        c.mlp_hidden = to_int(v);
    } else if (key == "predictor.mlp_layers") {
        c.mlp_layers = to_int(v);
    } else if (key == "predictor.gru_hidden") {
        c.gru_hidden = to_int(v);
    } else if (key == "predictor.gru_layers") {
        c.gru_layers = to_int(v);
    } else if (key == "training.epochs") {
        c.training.epochs = to_int(v);
    } else if (key == "training.batch_size") {
        c.training.batch_size = to_int(v);
    } else if (key == "training.learning_rate") {
        c.training.learning_rate = to_real(v);
    } else if (key == "training.input_noise_std") {
        c.training.input_noise_std = to_real(v);
    } else if (key == "conformal.bounds") {
        c.bounds = parse_bounds_mode(v);
    } else if (key == "conformal.input_noise_std") {
        c.calibration_noise_std = to_real(v);
    } else if (key == "filter.samples") {
        c.filter_samples = to_count(v);
    } else if (key == "kf.order") {
        c.kf_order = to_int(v);
    } else if (key == "kf.mode") {
        if (v != "per_link") {
            throw std::invalid_argument("kf.mode: only 'per_link' is supported");
        }
    } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

ExperimentConfig parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    ExperimentConfig config;
    for (const auto& [section, entries] : tree) {
        if (entries.empty()) {
            throw FormatError("config: key '" + section + "' must appear inside a [section]");
        }
        for (const auto& [key, node] : entries) {
            try {
                apply_setting(config, section + "." + key, node.get_value<std::string>());
            } catch (const std::exception& e) {
                throw FormatError(std::string("config: ") + e.what());
            }
        }
    }
    config.validate();
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file " + path.string());
    }
    return parse_config(in);
}

void write_config(std::ostream& out, const ExperimentConfig& c) {
    const auto real = [](double x) { return format_double(x); };
    out << "[channel]\n"
        << "bs_antennas = " << c.system.bs_antennas << '\n'
        << "ue_antennas = " << c.system.ue_antennas << '\n'
        << "carrier_hz = " << real(c.system.carrier_hz) << '\n'
        << "slot_s = " << real(c.system.slot_s) << '\n'
        << "speed_kmh = " << real(c.system.speed_kmh) << '\n'
        << "bandwidth_hz = " << real(c.system.bandwidth_hz) << '\n'
        << "thermal_noise_dbm_hz = " << real(c.system.thermal_noise_dbm_hz) << '\n'
        << "pathloss_db = " << real(c.system.pathloss_db) << '\n'
        << "trace_length = " << c.trace_length << '\n'
        << "seeds = " << join(c.seeds, [](std::uint64_t s) { return std::to_string(s); }) << "\n\n"
        << "[experiment]\n"
        << "methods = " << join(c.methods, [](Method m) { return std::string(to_string(m)); }) << '\n'
        << "tx_power_dbm = " << join(c.tx_powers_dbm, real) << '\n'
        << "workers = " << c.workers << "\n\n"
        << "[predictor]\n"
        << "history = " << c.history << '\n'
        << "quantiles = " << join(c.levels.taus, real) << '\n'
        << "mlp_hidden = " << c.mlp_hidden << '\n'
        << "mlp_layers = " << c.mlp_layers << '\n'
        << "gru_hidden = " << c.gru_hidden << '\n'
        << "gru_layers = " << c.gru_layers << "\n\n"
        << "[training]\n"
        << "epochs = " << c.training.epochs << '\n'
        << "batch_size = " << c.training.batch_size << '\n'
        << "learning_rate = " << real(c.training.learning_rate) << '\n'
        << "input_noise_std = " << real(c.training.input_noise_std) << "\n\n"
        << "[conformal]\n"
        << "bounds = " << to_string(c.bounds) << '\n'
        << "input_noise_std = " << real(c.calibration_noise_std) << "\n\n"
        << "[filter]\n"
        << "samples = " << c.filter_samples << "\n\n"
        << "[kf]\n"
        << "order = " << c.kf_order << '\n'
        << "mode = per_link\n";
}

} // namespace dcbf
