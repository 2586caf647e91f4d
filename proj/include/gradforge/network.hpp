#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "gradforge/activation.hpp"
#include "gradforge/conv.hpp"
#include "gradforge/errors.hpp"
#include "gradforge/linalg.hpp"
#include "gradforge/rng.hpp"

namespace gradforge {

/// Fully connected layer: weights is n_l x n_{l-1}, row j holds the weights
/// neuron j applies to the previous layer's outputs.
struct DenseLayer {
    Matrix weights;
    Vector biases;
    ActivationKind activation = ActivationKind::sigmoid();
};

/// Parameter-free componentwise nonlinearity. Lets a block pool before
/// activating (conv -> pool -> act) as well as the usual conv(act) -> pool.
struct ActivationLayer {
    ActivationKind activation = ActivationKind::relu();
};

using Layer = std::variant<DenseLayer, ConvLayer, PoolLayer, ActivationLayer>;

/// Ordered layer stack plus the input shape. Layer 1 of the classical
/// description is not materialized; it exists only as input_shape.
struct NetworkSpec {
    Shape3 input_shape{1, 1, 1};
    std::vector<Layer> layers;

    std::size_t input_dim() const { return input_shape.volume(); }

    static NetworkSpec dense(std::size_t input_dim) {
        NetworkSpec net;
        net.input_shape = {1, 1, input_dim};
        return net;
    }

    NetworkSpec& add_dense(std::size_t out_dim, ActivationKind act) {
        const std::size_t in_dim = output_shape_unchecked().volume();
        DenseLayer l;
        l.weights = Matrix(out_dim, in_dim);
        l.biases = Vector(out_dim, 0.0);
        l.activation = act;
        layers.emplace_back(std::move(l));
        return *this;
    }

    NetworkSpec& add_conv(std::size_t fh, std::size_t fw, std::size_t out_channels,
                          std::size_t stride, std::size_t pad, ActivationKind act) {
        const Shape3 in = output_shape_unchecked();
        ConvLayer l;
        l.filters = Filter4(fh, fw, in.channels, out_channels);
        l.biases = Vector(out_channels, 0.0);
        l.stride = stride;
        l.zero_pad = pad;
        l.activation = act;
        layers.emplace_back(std::move(l));
        return *this;
    }

    NetworkSpec& add_pool(PoolMode mode, std::size_t window, std::size_t stride) {
        layers.emplace_back(PoolLayer{mode, window, stride});
        return *this;
    }

    NetworkSpec& add_activation(ActivationKind act) {
        layers.emplace_back(ActivationLayer{act});
        return *this;
    }

private:
    Shape3 output_shape_unchecked() const; // defined after layer_shapes
};

/// Output shape of each stage: index 0 is the input shape, index l the
/// output of layers[l-1]. Throws ShapeError on any chaining violation, so a
/// spec that passes here cannot shape-fault during forward.
inline std::vector<Shape3> layer_shapes(const NetworkSpec& net) {
    if (net.layers.empty()) throw ShapeError("network: needs at least one layer");
    if (net.input_shape.volume() == 0) throw ShapeError("network: empty input shape");
    std::vector<Shape3> shapes;
    shapes.reserve(net.layers.size() + 1);
    shapes.push_back(net.input_shape);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Shape3& in = shapes.back();
        const Layer& layer = net.layers[l];
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            if (d->weights.cols != in.volume())
                throw ShapeError("layer " + std::to_string(l + 1) + ": dense weights are " +
                                 shape_str(d->weights) + " but input has dimension " +
                                 std::to_string(in.volume()));
            if (d->weights.rows != d->biases.size())
                throw ShapeError("layer " + std::to_string(l + 1) + ": " +
                                 std::to_string(d->weights.rows) + " rows but " +
                                 std::to_string(d->biases.size()) + " biases");
            shapes.push_back({1, 1, d->weights.rows});
        } else if (const auto* c = std::get_if<ConvLayer>(&layer)) {
            shapes.push_back(conv_out_shape(*c, in));
        } else if (const auto* p = std::get_if<PoolLayer>(&layer)) {
            shapes.push_back(pool_out_shape(*p, in));
        } else {
            shapes.push_back(in);
        }
    }
    return shapes;
}

inline Shape3 NetworkSpec::output_shape_unchecked() const {
    return layers.empty() ? input_shape : layer_shapes(*this).back();
}

inline std::size_t output_dim(const NetworkSpec& net) {
    return layer_shapes(net).back().volume();
}

/// Activation attached to a layer; pooling has none (identity).
inline ActivationKind layer_activation(const Layer& layer) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->activation;
    if (const auto* c = std::get_if<ConvLayer>(&layer)) return c->activation;
    if (const auto* a = std::get_if<ActivationLayer>(&layer)) return a->activation;
    return ActivationKind::identity();
}

/// Everything one forward pass produces: activations a^[l] (index 0 is the
/// input), weighted inputs z^[l] per non-input layer, max-pool argmax routes,
/// and the dropout masks when training drew any.
struct ForwardTrace {
    std::vector<Vector> activations;
    std::vector<Vector> weighted_inputs;
    std::vector<PoolTrace> pool_traces;  // per layer; empty unless max pool
    std::vector<Vector> dropout_masks;   // per layer; empty when not masked

    const Vector& output() const { return activations.back(); }
};

/// Per-step dropout masks, one slot per layer; empty slot = keep everything.
struct DropoutPlan {
    std::vector<Vector> masks;
};

inline void forward_into(const NetworkSpec& net, const Vector& x, ForwardTrace& trace,
                         const DropoutPlan* dropout = nullptr) {
    if (x.size() != net.input_dim())
        throw ShapeError("forward: input has length " + std::to_string(x.size()) +
                         " but network expects " + std::to_string(net.input_dim()));
    const std::vector<Shape3> shapes = layer_shapes(net);
    const std::size_t n = net.layers.size();
    trace.activations.assign(n + 1, {});
    trace.weighted_inputs.assign(n, {});
    trace.pool_traces.assign(n, {});
    trace.dropout_masks.assign(n, {});
    trace.activations[0] = x;

    for (std::size_t l = 0; l < n; ++l) {
        const Layer& layer = net.layers[l];
        Vector& z = trace.weighted_inputs[l];
        Vector& a = trace.activations[l + 1];
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            matvec_into(d->weights, trace.activations[l], z);
            for (std::size_t j = 0; j < z.size(); ++j) z[j] += d->biases[j];
            a.resize(z.size());
            for (std::size_t j = 0; j < z.size(); ++j)
                a[j] = apply_scalar(d->activation, z[j]);
        } else if (const auto* c = std::get_if<ConvLayer>(&layer)) {
            Tensor3 in(shapes[l], trace.activations[l]);
            Tensor3 zt = conv2d_preactivation(*c, in);
            a.resize(zt.data.size());
            for (std::size_t j = 0; j < zt.data.size(); ++j)
                a[j] = apply_scalar(c->activation, zt.data[j]);
            z = std::move(zt.data);
        } else if (const auto* p = std::get_if<PoolLayer>(&layer)) {
            Tensor3 in(shapes[l], trace.activations[l]);
            auto [out, ptrace] = pool_forward(*p, in);
            trace.pool_traces[l] = std::move(ptrace);
            z = out.data;
            a = std::move(out.data);
        } else {
            const auto& act = std::get<ActivationLayer>(layer);
            z = trace.activations[l];
            a.resize(z.size());
            for (std::size_t j = 0; j < z.size(); ++j)
                a[j] = apply_scalar(act.activation, z[j]);
        }
        if (dropout && l < dropout->masks.size() && !dropout->masks[l].empty()) {
            const Vector& mask = dropout->masks[l];
            if (mask.size() != a.size())
                throw ShapeError("dropout mask for layer " + std::to_string(l + 1) + " has " +
                                 std::to_string(mask.size()) + " entries, activations have " +
                                 std::to_string(a.size()));
            for (std::size_t j = 0; j < a.size(); ++j) a[j] *= mask[j];
            trace.dropout_masks[l] = mask;
        }
    }
}

inline ForwardTrace forward(const NetworkSpec& net, const Vector& x) {
    ForwardTrace trace;
    forward_into(net, x, trace);
    return trace;
}

/// Index of the largest output component; ties go to the lowest index.
inline std::size_t predict_class(const NetworkSpec& net, const Vector& x) {
    ForwardTrace trace;
    forward_into(net, x, trace);
    const Vector& out = trace.output();
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i] > out[best]) best = i;
    return best;
}

inline std::size_t param_count(const NetworkSpec& net) {
    std::size_t n = 0;
    for (const Layer& layer : net.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer))
            n += d->weights.data.size() + d->biases.size();
        else if (const auto* c = std::get_if<ConvLayer>(&layer))
            n += c->filters.data.size() + c->biases.size();
    }
    return n;
}

/// Pointers to every trainable parameter, layer by layer, weights (storage
/// order) before biases. This is the canonical parameter order used by the
/// finite-difference oracle and the model file.
inline std::vector<double*> param_ptrs(NetworkSpec& net) {
    std::vector<double*> ptrs;
    ptrs.reserve(param_count(net));
    for (Layer& layer : net.layers) {
        if (auto* d = std::get_if<DenseLayer>(&layer)) {
            for (double& w : d->weights.data) ptrs.push_back(&w);
            for (double& b : d->biases) ptrs.push_back(&b);
        } else if (auto* c = std::get_if<ConvLayer>(&layer)) {
            for (double& w : c->filters.data) ptrs.push_back(&w);
            for (double& b : c->biases) ptrs.push_back(&b);
        }
    }
    return ptrs;
}

/// Draws every weight and bias i.i.d. standard normal from the ParamInit
/// stream of `seed`, in canonical parameter order. Deterministic given seed.
inline NetworkSpec init_params(NetworkSpec net, std::uint64_t seed) {
    Pcg32 rng = make_rng(seed, RngStream::ParamInit);
    for (double* p : param_ptrs(net)) *p = rng.normal();
    return net;
}

} // namespace gradforge
