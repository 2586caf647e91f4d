#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "gradforge/errors.hpp"
#include "gradforge/network.hpp"
#include "gradforge/rng.hpp"
#include "gradforge/util.hpp"

namespace gradforge {

// Model files are versioned UTF-8 text:
//
//   GRADFORGE v1 pcg32
//   input 2            (or: input 32 32 3)
//   layers 3
//   dense 2 2 sigmoid
//   w <r0c0> <r0c1>
//   w <r1c0> <r1c1>
//   b <b0> <b1>
//   conv 5 5 3 32 1 2 relu
//   w ...              (filter entries in storage order, 8 per line)
//   b ...
//   pool max 2 2
//   act relu
//
// Reals carry 17 significant digits, so save -> load -> save is
// byte-identical. The header names the generator whose seeds the file's
// parameters came from.

inline void save_model(const NetworkSpec& net, std::ostream& out) {
    layer_shapes(net); // refuse to persist an inconsistent network
    out << "GRADFORGE v1 " << kGeneratorName << "\n";
    out << "input";
    if (net.input_shape.height == 1 && net.input_shape.width == 1)
        out << ' ' << net.input_shape.channels;
    else
        out << ' ' << net.input_shape.height << ' ' << net.input_shape.width << ' '
            << net.input_shape.channels;
    out << "\nlayers " << net.layers.size() << "\n";

    const auto write_flat = [&out](const Vector& v, std::size_t per_line) {
        for (std::size_t i = 0; i < v.size(); i += per_line) {
            out << 'w';
            for (std::size_t j = i; j < std::min(v.size(), i + per_line); ++j)
                out << ' ' << format_real(v[j]);
            out << '\n';
        }
    };
    const auto write_biases = [&out](const Vector& v) {
        out << 'b';
        for (double x : v) out << ' ' << format_real(x);
        out << '\n';
    };

    for (const Layer& layer : net.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            out << "dense " << d->weights.rows << ' ' << d->weights.cols << ' '
                << to_string(d->activation) << '\n';
            write_flat(d->weights.data, d->weights.cols);
            write_biases(d->biases);
        } else if (const auto* c = std::get_if<ConvLayer>(&layer)) {
            out << "conv " << c->filters.fh << ' ' << c->filters.fw << ' '
                << c->filters.in_channels << ' ' << c->filters.out_channels << ' ' << c->stride
                << ' ' << c->zero_pad << ' ' << to_string(c->activation) << '\n';
            write_flat(c->filters.data, 8);
            write_biases(c->biases);
        } else if (const auto* p = std::get_if<PoolLayer>(&layer)) {
            out << "pool " << (p->mode == PoolMode::Max ? "max" : "avg") << ' ' << p->window
                << ' ' << p->stride << '\n';
        } else {
            out << "act " << to_string(std::get<ActivationLayer>(layer).activation) << '\n';
        }
    }
}

inline void save_model(const NetworkSpec& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DomainError("model: cannot open '" + path + "' for writing");
    save_model(net, f);
    if (!f) throw DomainError("model: write to '" + path + "' failed");
}

namespace detail {

class ModelReader {
public:
    explicit ModelReader(std::istream& in) : in_(in) {}

    std::vector<std::string> next_tokens() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            const std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            return split_ws(t);
        }
        throw ParseError("model: unexpected end of file after line " + std::to_string(line_no_));
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("model line " + std::to_string(line_no_) + ": " + msg);
    }

    std::size_t count(const std::string& s, const std::string& what) {
        const long v = parse_integer(s, "model line " + std::to_string(line_no_) + ": " + what);
        if (v < 0) fail(what + " must be nonnegative");
        return static_cast<std::size_t>(v);
    }

    /// Reads `n` reals spread over 'w'-tagged lines, then the 'b' line.
    void read_params(std::size_t n_weights, std::size_t n_biases, Vector& weights,
                     Vector& biases) {
        weights.clear();
        weights.reserve(n_weights);
        while (weights.size() < n_weights) {
            const auto toks = next_tokens();
            if (toks[0] != "w") fail("expected a 'w' line, got '" + toks[0] + "'");
            for (std::size_t i = 1; i < toks.size(); ++i)
                weights.push_back(
                    parse_real(toks[i], "model line " + std::to_string(line_no_)));
            if (weights.size() > n_weights) fail("too many weight entries");
        }
        const auto toks = next_tokens();
        if (toks[0] != "b") fail("expected a 'b' line, got '" + toks[0] + "'");
        biases.clear();
        biases.reserve(n_biases);
        for (std::size_t i = 1; i < toks.size(); ++i)
            biases.push_back(parse_real(toks[i], "model line " + std::to_string(line_no_)));
        if (biases.size() != n_biases)
            fail("expected " + std::to_string(n_biases) + " biases, got " +
                 std::to_string(biases.size()));
    }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

} // namespace detail

inline NetworkSpec load_model(std::istream& in) {
    detail::ModelReader r(in);

    auto header = r.next_tokens();
    if (header.size() != 3 || header[0] != "GRADFORGE" || header[1] != "v1")
        r.fail("expected header 'GRADFORGE v1 <prng>'");
    if (header[2] != kGeneratorName)
        r.fail("model was produced with generator '" + header[2] + "', this build uses '" +
               std::string(kGeneratorName) + "'");

    auto input = r.next_tokens();
    if (input.empty() || input[0] != "input" || (input.size() != 2 && input.size() != 4))
        r.fail("expected 'input <n>' or 'input <h> <w> <c>'");
    NetworkSpec net;
    if (input.size() == 2) {
        net.input_shape = {1, 1, r.count(input[1], "input dimension")};
    } else {
        net.input_shape = {r.count(input[1], "input height"), r.count(input[2], "input width"),
                           r.count(input[3], "input channels")};
    }

    auto nl = r.next_tokens();
    if (nl.size() != 2 || nl[0] != "layers") r.fail("expected 'layers <count>'");
    const std::size_t n_layers = r.count(nl[1], "layer count");
    if (n_layers == 0) r.fail("network needs at least one layer");

    for (std::size_t l = 0; l < n_layers; ++l) {
        auto toks = r.next_tokens();
        if (toks[0] == "dense") {
            if (toks.size() != 4) r.fail("expected 'dense <rows> <cols> <activation>'");
            DenseLayer d;
            const std::size_t rows = r.count(toks[1], "rows");
            const std::size_t cols = r.count(toks[2], "cols");
            d.activation = parse_activation(toks[3]);
            Vector w, b;
            r.read_params(rows * cols, rows, w, b);
            d.weights = Matrix(rows, cols, std::move(w));
            d.biases = std::move(b);
            net.layers.emplace_back(std::move(d));
        } else if (toks[0] == "conv") {
            if (toks.size() != 8)
                r.fail("expected 'conv <fh> <fw> <in> <out> <stride> <pad> <activation>'");
            ConvLayer c;
            c.filters = Filter4(r.count(toks[1], "fh"), r.count(toks[2], "fw"),
                                r.count(toks[3], "in channels"), r.count(toks[4], "out channels"));
            c.stride = r.count(toks[5], "stride");
            c.zero_pad = r.count(toks[6], "pad");
            c.activation = parse_activation(toks[7]);
            if (c.stride == 0) r.fail("stride must be positive");
            Vector w, b;
            r.read_params(c.filters.size(), c.filters.out_channels, w, b);
            c.filters.data = std::move(w);
            c.biases = std::move(b);
            net.layers.emplace_back(std::move(c));
        } else if (toks[0] == "pool") {
            if (toks.size() != 4) r.fail("expected 'pool max|avg <window> <stride>'");
            PoolLayer p;
            if (toks[1] == "max")
                p.mode = PoolMode::Max;
            else if (toks[1] == "avg")
                p.mode = PoolMode::Average;
            else
                r.fail("pool mode must be max or avg, got '" + toks[1] + "'");
            p.window = r.count(toks[2], "window");
            p.stride = r.count(toks[3], "stride");
            if (p.window == 0 || p.stride == 0) r.fail("window and stride must be positive");
            net.layers.emplace_back(p);
        } else if (toks[0] == "act") {
            if (toks.size() != 2) r.fail("expected 'act <activation>'");
            net.layers.emplace_back(ActivationLayer{parse_activation(toks[1])});
        } else {
            r.fail("unknown layer kind '" + toks[0] + "'");
        }
    }
    layer_shapes(net); // chain validation
    return net;
}

inline NetworkSpec load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DomainError("model: cannot open '" + path + "'");
    return load_model(f);
}

inline std::string model_to_string(const NetworkSpec& net) {
    std::ostringstream ss;
    save_model(net, ss);
    return ss.str();
}

} // namespace gradforge
