#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gradforge/data.hpp"
#include "gradforge/errors.hpp"
#include "gradforge/loss.hpp"
#include "gradforge/network.hpp"
#include "gradforge/optimize.hpp"
#include "gradforge/util.hpp"

namespace gradforge {

// Run configuration: UTF-8 "key: value" lines, '#' comments. Example:
//
//   network: input 2 | dense 2 sigmoid | dense 3 sigmoid | dense 2 sigmoid
//   data: toy
//   loss: quadratic
//   scheme: single_with_replacement
//   eta: 0.05
//   niter: 1000000
//   seed: 1
//   cost_log_stride: 1000
//   out: out
//
// CLI flags override file values.

struct RunConfig {
    std::string network_desc;
    std::string data = "toy"; // toy | toy_extended | path to CSV
    std::size_t n_features = 0;
    std::size_t num_classes = 0;
    double val_fraction = 0.0;
    std::string loss = "quadratic";
    double lambda = 0.0;
    std::string scheme = "single_with_replacement";
    std::optional<double> eta;
    std::string eta_schedule;
    double momentum = 0.0;
    std::string dropout; // comma list, one probability per layer
    std::optional<std::size_t> niter;
    std::optional<std::size_t> epochs;
    std::uint64_t seed = 0;
    std::size_t cost_log_stride = 1;
    std::string out_dir = "out";
    bool log_samples = false;
};

namespace detail {

inline std::size_t to_count(const std::string& v, const std::string& key) {
    long x = 0;
    try {
        x = parse_integer(v, key);
    } catch (const ParseError&) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
    if (x < 0) throw ConfigError(key + ": must be nonnegative, got '" + v + "'");
    return static_cast<std::size_t>(x);
}

inline double to_real(const std::string& v, const std::string& key) {
    try {
        return parse_real(v, key);
    } catch (const ParseError&) {
        throw ConfigError(key + ": expected a real number, got '" + v + "'");
    }
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

} // namespace detail

inline RunConfig parse_config(std::istream& in) {
    RunConfig rc;
    std::map<std::string, bool> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t colon = t.find(':');
        if (colon == std::string::npos)
            throw ParseError("config line " + std::to_string(line_no) +
                             ": expected 'key: value'");
        const std::string key = trim(t.substr(0, colon));
        const std::string value = trim(t.substr(colon + 1));
        if (seen[key])
            throw ConfigError(key + ": duplicated at config line " + std::to_string(line_no));
        seen[key] = true;

        if (key == "network") rc.network_desc = value;
        else if (key == "data") rc.data = value;
        else if (key == "n_features") rc.n_features = detail::to_count(value, key);
        else if (key == "classes") rc.num_classes = detail::to_count(value, key);
        else if (key == "val_fraction") rc.val_fraction = detail::to_real(value, key);
        else if (key == "loss") rc.loss = value;
        else if (key == "lambda") rc.lambda = detail::to_real(value, key);
        else if (key == "scheme") rc.scheme = value;
        else if (key == "eta") rc.eta = detail::to_real(value, key);
        else if (key == "eta_schedule") rc.eta_schedule = value;
        else if (key == "momentum") rc.momentum = detail::to_real(value, key);
        else if (key == "dropout") rc.dropout = value;
        else if (key == "niter") rc.niter = detail::to_count(value, key);
        else if (key == "epochs") rc.epochs = detail::to_count(value, key);
        else if (key == "seed") rc.seed = static_cast<std::uint64_t>(detail::to_count(value, key));
        else if (key == "cost_log_stride") rc.cost_log_stride = detail::to_count(value, key);
        else if (key == "out") rc.out_dir = value;
        else if (key == "log_samples") rc.log_samples = detail::to_count(value, key) != 0;
        else throw ConfigError("unknown config key '" + key + "'");
    }
    return rc;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open '" + path + "'");
    return parse_config(f);
}

/// network: input 2 | dense 2 sigmoid | conv 5 5 3 32 1 2 relu | pool max 2 2 | act relu
/// dense also accepts an explicit input dimension: dense <out> <in> <act>.
inline NetworkSpec build_network(const std::string& desc) {
    if (trim(desc).empty()) throw ConfigError("network: missing description");
    const auto segments = detail::split_on(desc, '|');
    NetworkSpec net;
    bool have_input = false;
    for (const std::string& seg : segments) {
        const auto toks = split_ws(seg);
        if (toks.empty()) throw ConfigError("network: empty segment");
        const std::string& kind = toks[0];
        if (kind == "input") {
            if (have_input) throw ConfigError("network: duplicate input segment");
            if (toks.size() == 2)
                net.input_shape = {1, 1, detail::to_count(toks[1], "network")};
            else if (toks.size() == 4)
                net.input_shape = {detail::to_count(toks[1], "network"),
                                   detail::to_count(toks[2], "network"),
                                   detail::to_count(toks[3], "network")};
            else
                throw ConfigError("network: input takes 1 or 3 dimensions");
            have_input = true;
            continue;
        }
        if (!have_input) throw ConfigError("network: must start with an input segment");
        try {
            if (kind == "dense") {
                if (toks.size() == 3) {
                    net.add_dense(detail::to_count(toks[1], "network"),
                                  parse_activation(toks[2]));
                } else if (toks.size() == 4) {
                    const std::size_t out = detail::to_count(toks[1], "network");
                    const std::size_t in = detail::to_count(toks[2], "network");
                    net.add_dense(out, parse_activation(toks[3]));
                    const auto& d = std::get<DenseLayer>(net.layers.back());
                    if (d.weights.cols != in)
                        throw ConfigError("network: dense expects input dimension " +
                                          std::to_string(d.weights.cols) + ", description says " +
                                          std::to_string(in));
                } else {
                    throw ConfigError("network: dense takes '<out> <activation>' or "
                                      "'<out> <in> <activation>'");
                }
            } else if (kind == "conv") {
                if (toks.size() != 8)
                    throw ConfigError(
                        "network: conv takes '<fh> <fw> <in> <out> <stride> <pad> <activation>'");
                const std::size_t fh = detail::to_count(toks[1], "network");
                const std::size_t fw = detail::to_count(toks[2], "network");
                const std::size_t in_ch = detail::to_count(toks[3], "network");
                const std::size_t out_ch = detail::to_count(toks[4], "network");
                const std::size_t stride = detail::to_count(toks[5], "network");
                const std::size_t pad = detail::to_count(toks[6], "network");
                if (stride == 0) throw ConfigError("network: conv stride must be positive");
                net.add_conv(fh, fw, out_ch, stride, pad, parse_activation(toks[7]));
                const auto& c = std::get<ConvLayer>(net.layers.back());
                if (c.filters.in_channels != in_ch)
                    throw ConfigError("network: conv expects " +
                                      std::to_string(c.filters.in_channels) +
                                      " input channels, description says " +
                                      std::to_string(in_ch));
                (void)fh;
                (void)fw;
            } else if (kind == "pool") {
                if (toks.size() != 4)
                    throw ConfigError("network: pool takes 'max|avg <window> <stride>'");
                PoolMode mode;
                if (toks[1] == "max") mode = PoolMode::Max;
                else if (toks[1] == "avg") mode = PoolMode::Average;
                else throw ConfigError("network: pool mode must be max or avg");
                const std::size_t window = detail::to_count(toks[2], "network");
                const std::size_t stride = detail::to_count(toks[3], "network");
                if (window == 0 || stride == 0)
                    throw ConfigError("network: pool window and stride must be positive");
                net.add_pool(mode, window, stride);
            } else if (kind == "act") {
                if (toks.size() != 2) throw ConfigError("network: act takes '<activation>'");
                net.add_activation(parse_activation(toks[1]));
            } else {
                throw ConfigError("network: unknown layer kind '" + kind + "'");
            }
        } catch (const ShapeError& e) {
            throw ConfigError(std::string("network: ") + e.what());
        } catch (const ParseError& e) {
            throw ConfigError(std::string("network: ") + e.what());
        }
    }
    if (net.layers.empty()) throw ConfigError("network: needs at least one layer");
    try {
        layer_shapes(net);
    } catch (const ShapeError& e) {
        throw ConfigError(std::string("network: ") + e.what());
    }
    return net;
}

inline SamplingScheme parse_scheme(const std::string& s) {
    if (s == "full_batch") return SamplingScheme::full_batch();
    if (s == "single_with_replacement") return SamplingScheme::single_with_replacement();
    if (s == "epoch_shuffle") return SamplingScheme::epoch_shuffle();
    if (s.rfind("minibatch:", 0) == 0) {
        const auto parts = detail::split_on(s, ':');
        if (parts.size() < 2 || parts.size() > 3)
            throw ConfigError("scheme: expected minibatch:<m>[:with_replacement]");
        const std::size_t m = detail::to_count(parts[1], "scheme");
        bool with_replacement = false;
        if (parts.size() == 3) {
            if (parts[2] != "with_replacement")
                throw ConfigError("scheme: trailing option must be with_replacement");
            with_replacement = true;
        }
        return SamplingScheme::mini_batch(m, with_replacement);
    }
    throw ConfigError("scheme: unknown scheme '" + s + "'");
}

/// "0-29:0.05,30-39:0.005,40-44:0.0005"; single entries may also be bare
/// "<lo>-<hi>:<eta>".
inline std::vector<LrRange> parse_eta_schedule(const std::string& s) {
    std::vector<LrRange> out;
    for (const std::string& entry : detail::split_on(s, ',')) {
        const std::size_t colon = entry.find(':');
        const std::size_t dash = entry.find('-');
        if (colon == std::string::npos || dash == std::string::npos || dash > colon)
            throw ConfigError("lr_schedule: expected '<lo>-<hi>:<eta>', got '" + entry + "'");
        LrRange r;
        r.lo = detail::to_count(trim(entry.substr(0, dash)), "lr_schedule");
        r.hi = detail::to_count(trim(entry.substr(dash + 1, colon - dash - 1)), "lr_schedule");
        r.eta = detail::to_real(trim(entry.substr(colon + 1)), "lr_schedule");
        if (!(r.eta > 0.0))
            throw ConfigError("lr_schedule: eta must be positive, got " +
                              std::to_string(r.eta));
        if (r.hi < r.lo) throw ConfigError("lr_schedule: range has hi < lo in '" + entry + "'");
        out.push_back(r);
    }
    return out;
}

inline TrainConfig make_train_config(const RunConfig& rc, std::size_t n_layers) {
    TrainConfig cfg;
    cfg.scheme = parse_scheme(rc.scheme);
    if (rc.eta && !rc.eta_schedule.empty())
        throw ConfigError("lr_schedule: give either eta or eta_schedule, not both");
    if (rc.eta) {
        if (!(*rc.eta > 0.0))
            throw ConfigError("lr_schedule: eta must be positive, got " +
                              std::to_string(*rc.eta));
        cfg.lr_schedule = {{0, std::size_t(-1), *rc.eta}};
    } else if (!rc.eta_schedule.empty()) {
        cfg.lr_schedule = parse_eta_schedule(rc.eta_schedule);
    } else {
        throw ConfigError("lr_schedule: eta or eta_schedule is required");
    }
    cfg.momentum = rc.momentum;
    if (!rc.dropout.empty()) {
        for (const std::string& p : detail::split_on(rc.dropout, ','))
            cfg.dropout_probs.push_back(detail::to_real(p, "dropout"));
        if (cfg.dropout_probs.size() != n_layers)
            throw ConfigError("dropout: " + std::to_string(cfg.dropout_probs.size()) +
                              " probabilities for " + std::to_string(n_layers) + " layers");
    }
    if (rc.niter && rc.epochs)
        throw ConfigError("budget: give either niter or epochs, not both");
    if (!rc.niter && !rc.epochs) throw ConfigError("budget: niter or epochs is required");
    cfg.budget_is_epochs = rc.epochs.has_value();
    cfg.budget = rc.epochs ? *rc.epochs : *rc.niter;
    cfg.seed = rc.seed;
    if (rc.cost_log_stride == 0)
        throw ConfigError("cost_log_stride: must be at least 1");
    cfg.cost_log_stride = rc.cost_log_stride;
    cfg.log_sample_indices = rc.log_samples;
    return cfg;
}

inline LossKind make_loss(const RunConfig& rc) {
    const Loss tag = [&] {
        try {
            return parse_loss(rc.loss);
        } catch (const ParseError& e) {
            throw ConfigError(std::string("loss: ") + e.what());
        }
    }();
    if (!(rc.lambda >= 0.0))
        throw ConfigError("lambda: must be nonnegative, got " + std::to_string(rc.lambda));
    return {tag, rc.lambda};
}

inline LabeledDataset load_configured_data(const RunConfig& rc) {
    if (rc.data == "toy") return toy_dataset();
    if (rc.data == "toy_extended") return toy_dataset_extended();
    if (rc.n_features == 0 || rc.num_classes == 0)
        throw ConfigError("data: CSV data needs n_features and classes");
    return load_csv(rc.data, rc.n_features, rc.num_classes);
}

} // namespace gradforge
