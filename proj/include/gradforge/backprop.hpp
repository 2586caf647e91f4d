#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "gradforge/conv.hpp"
#include "gradforge/errors.hpp"
#include "gradforge/linalg.hpp"
#include "gradforge/loss.hpp"
#include "gradforge/network.hpp"
#include "gradforge/threads.hpp"

namespace gradforge {

/// Per-layer parameter gradients, flat, in the layer's storage order
/// (weights row-major / filter order, then biases). Parameter-free layers
/// hold empty slots so indices line up with NetworkSpec::layers.
struct GradientBundle {
    struct LayerGrads {
        Vector weights;
        Vector biases;
    };
    std::vector<LayerGrads> layers;

    static GradientBundle zeros_like(const NetworkSpec& net) {
        GradientBundle g;
        g.layers.resize(net.layers.size());
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            if (const auto* d = std::get_if<DenseLayer>(&net.layers[l])) {
                g.layers[l].weights.assign(d->weights.data.size(), 0.0);
                g.layers[l].biases.assign(d->biases.size(), 0.0);
            } else if (const auto* c = std::get_if<ConvLayer>(&net.layers[l])) {
                g.layers[l].weights.assign(c->filters.data.size(), 0.0);
                g.layers[l].biases.assign(c->biases.size(), 0.0);
            }
        }
        return g;
    }

    bool same_shape(const GradientBundle& o) const {
        if (layers.size() != o.layers.size()) return false;
        for (std::size_t l = 0; l < layers.size(); ++l)
            if (layers[l].weights.size() != o.layers[l].weights.size() ||
                layers[l].biases.size() != o.layers[l].biases.size())
                return false;
        return true;
    }

    /// this += c * other; shapes must match exactly.
    void scaled_add(const GradientBundle& other, double c) {
        if (!same_shape(other))
            throw ShapeError("GradientBundle: scaled_add between differently shaped bundles");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            for (std::size_t i = 0; i < layers[l].weights.size(); ++i)
                layers[l].weights[i] += c * other.layers[l].weights[i];
            for (std::size_t i = 0; i < layers[l].biases.size(); ++i)
                layers[l].biases[i] += c * other.layers[l].biases[i];
        }
    }

    void scale(double c) {
        for (auto& l : layers) {
            for (double& v : l.weights) v *= c;
            for (double& v : l.biases) v *= c;
        }
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& l : layers) {
            for (double v : l.weights) m = std::max(m, std::abs(v));
            for (double v : l.biases) m = std::max(m, std::abs(v));
        }
        return m;
    }
};

/// Pointers into a bundle in canonical parameter order (matches param_ptrs).
inline std::vector<double*> bundle_param_ptrs(GradientBundle& g) {
    std::vector<double*> ptrs;
    for (auto& l : g.layers) {
        for (double& v : l.weights) ptrs.push_back(&v);
        for (double& v : l.biases) ptrs.push_back(&v);
    }
    return ptrs;
}

namespace detail {

/// Adds scale * 2 * lambda * W to every weight-gradient slot.
inline void add_regularization(const NetworkSpec& net, double lambda, double scale,
                               GradientBundle& g) {
    if (lambda <= 0.0) return;
    const double c = 2.0 * lambda * scale;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (const auto* d = std::get_if<DenseLayer>(&net.layers[l]))
            axpy(g.layers[l].weights, c, d->weights.data);
        else if (const auto* cv = std::get_if<ConvLayer>(&net.layers[l]))
            axpy(g.layers[l].weights, c, cv->filters.data);
    }
}

/// Backward through the structural (linear) part of layer l: fills the
/// layer's parameter gradients from delta = dC/dz^[l] and returns
/// dC/da^[l-1].
inline Vector structural_backward(const NetworkSpec& net, const std::vector<Shape3>& shapes,
                                  const ForwardTrace& trace, std::size_t l,
                                  const Vector& delta, GradientBundle& g) {
    const Layer& layer = net.layers[l];
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        if (delta.size() != d->weights.rows)
            throw ShapeError("backward: delta has length " + std::to_string(delta.size()) +
                             " at a dense layer with " + std::to_string(d->weights.rows) +
                             " outputs");
        const Vector& a_prev = trace.activations[l];
        // dC/db = delta, dC/dW = outer(delta, a_prev), flattened row-major
        g.layers[l].biases = delta;
        Vector& wg = g.layers[l].weights;
        wg.resize(delta.size() * a_prev.size());
        std::size_t idx = 0;
        for (std::size_t j = 0; j < delta.size(); ++j)
            for (std::size_t k = 0; k < a_prev.size(); ++k) wg[idx++] = delta[j] * a_prev[k];
        return matvec_transpose(d->weights, delta);
    }
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
        ConvGrads cg = conv_backward(*c, Tensor3(shapes[l], trace.activations[l]),
                                     Tensor3(shapes[l + 1], delta));
        g.layers[l].weights = std::move(cg.filter_grads);
        g.layers[l].biases = std::move(cg.bias_grads);
        return std::move(cg.input_delta.data);
    }
    if (const auto* p = std::get_if<PoolLayer>(&layer)) {
        return pool_backward(*p, shapes[l], trace.pool_traces[l],
                             Tensor3(shapes[l + 1], delta))
            .data;
    }
    return delta; // activation-only layer: linear part is the identity
}

inline void apply_mask_if_any(const ForwardTrace& trace, std::size_t l, Vector& v) {
    if (l < trace.dropout_masks.size() && !trace.dropout_masks[l].empty()) {
        const Vector& mask = trace.dropout_masks[l];
        for (std::size_t j = 0; j < v.size(); ++j) v[j] *= mask[j];
    }
}

} // namespace detail

/// Gradients of the regularized per-sample cost by the backward recursion:
/// delta at the output from the loss, then per layer
///   delta^[l] = phi'_l(z^[l]) o (structural transpose of delta^[l+1]),
///   bias grads = delta^[l], weight grads = outer(delta^[l], a^[l-1]),
/// with conv/pool layers contributing their Jacobian-transpose actions.
/// `scale` multiplies the whole gradient (callers use it to average
/// mini-batches without a second pass over the bundle).
inline GradientBundle backward(const NetworkSpec& net, const ForwardTrace& trace,
                               const Target& target, const LossKind& loss,
                               double scale = 1.0) {
    const std::vector<Shape3> shapes = layer_shapes(net);
    const std::size_t n = net.layers.size();
    if (trace.activations.size() != n + 1 || trace.weighted_inputs.size() != n)
        throw ShapeError("backward: trace does not match network layer count");

    GradientBundle g = GradientBundle::zeros_like(net);
    Vector delta = output_delta(loss, net, trace, target);
    if (scale != 1.0) scale_in_place(delta, scale);

    for (std::size_t l = n; l-- > 0;) {
        Vector upstream = detail::structural_backward(net, shapes, trace, l, delta, g);
        if (l == 0) break;
        const Vector& z_prev = trace.weighted_inputs[l - 1];
        if (upstream.size() != z_prev.size())
            throw ShapeError("backward: propagated delta has length " +
                             std::to_string(upstream.size()) + " but layer " +
                             std::to_string(l) + " has " + std::to_string(z_prev.size()) +
                             " weighted inputs");
        const ActivationKind act = layer_activation(net.layers[l - 1]);
        delta.resize(z_prev.size());
        for (std::size_t j = 0; j < z_prev.size(); ++j)
            delta[j] = derivative_scalar(act, z_prev[j]) * upstream[j];
        detail::apply_mask_if_any(trace, l - 1, delta);
    }
    detail::add_regularization(net, loss.lambda, scale, g);
    return g;
}

/// Same contract as backward, computed with explicit diagonal matrices
/// D^[l] = diag(phi'(z^[l])) in place of the Hadamard products:
///   delta^[l] = D^[l] (W^[l+1])^T delta^[l+1].
/// Equivalence witness for the matrix form of the recursion; it materializes
/// D^[l] and W^T, so keep it to small networks.
inline GradientBundle backward_diagonal_form(const NetworkSpec& net, const ForwardTrace& trace,
                                             const Target& target, const LossKind& loss) {
    const std::vector<Shape3> shapes = layer_shapes(net);
    const std::size_t n = net.layers.size();
    if (trace.activations.size() != n + 1 || trace.weighted_inputs.size() != n)
        throw ShapeError("backward: trace does not match network layer count");

    const auto diag_of = [](const ActivationKind& act, const Vector& z) {
        Matrix d(z.size(), z.size());
        for (std::size_t j = 0; j < z.size(); ++j)
            d(j, j) = derivative_scalar(act, z[j]);
        return d;
    };

    GradientBundle g = GradientBundle::zeros_like(net);

    // delta^[L] = D^[L] (a^[L] - y) for the quadratic cost; the softmax log
    // loss pairs with an identity output layer, where D^[L] is the identity.
    Vector delta;
    if (loss.tag == Loss::Quadratic) {
        const Matrix d_out =
            diag_of(layer_activation(net.layers.back()), trace.weighted_inputs.back());
        delta = matvec(d_out, sub(trace.output(), target_vector(target)));
        detail::apply_mask_if_any(trace, n - 1, delta);
    } else {
        delta = output_delta(loss, net, trace, target);
    }

    for (std::size_t l = n; l-- > 0;) {
        Vector upstream;
        if (const auto* d = std::get_if<DenseLayer>(&net.layers[l])) {
            g.layers[l].biases = delta;
            Matrix wm = outer(delta, trace.activations[l]);
            g.layers[l].weights = std::move(wm.data);
            upstream = matvec(transpose(d->weights), delta);
        } else {
            upstream = detail::structural_backward(net, shapes, trace, l, delta, g);
        }
        if (l == 0) break;
        const Matrix d_prev =
            diag_of(layer_activation(net.layers[l - 1]), trace.weighted_inputs[l - 1]);
        delta = matvec(d_prev, upstream);
        detail::apply_mask_if_any(trace, l - 1, delta);
    }
    detail::add_regularization(net, loss.lambda, 1.0, g);
    return g;
}

/// Central finite differences of an arbitrary scalar functional of the
/// parameters: grad_r = (f(p + h e_r) - f(p - h e_r)) / (2h), every
/// evaluation via a fresh pass with only parameter r touched. Parameters are
/// partitioned over the GRADFORGE_THREADS budget, each worker on its own
/// copy of the network, so f must be pure.
inline GradientBundle fd_gradient_of(const NetworkSpec& net,
                                     const std::function<double(const NetworkSpec&)>& f,
                                     double h = 1e-6) {
    if (!(h > 0.0)) throw DomainError("fd_gradient: h must be positive");
    GradientBundle g = GradientBundle::zeros_like(net);
    std::vector<double*> out = bundle_param_ptrs(g);
    parallel_chunks(out.size(), [&](std::size_t lo, std::size_t hi) {
        NetworkSpec work = net;
        std::vector<double*> params = param_ptrs(work);
        for (std::size_t r = lo; r < hi; ++r) {
            const double old = *params[r];
            *params[r] = old + h;
            const double up = f(work);
            *params[r] = old - h;
            const double down = f(work);
            *params[r] = old;
            *out[r] = (up - down) / (2.0 * h);
        }
    });
    return g;
}

/// Independent oracle for backward: differentiates the same regularized
/// per-sample cost numerically. Never calls any backward code.
inline GradientBundle fd_gradient(const NetworkSpec& net, const Vector& x,
                                  const Target& target, const LossKind& loss,
                                  double h = 1e-6) {
    return fd_gradient_of(
        net,
        [&](const NetworkSpec& n) {
            ForwardTrace trace;
            forward_into(n, x, trace);
            return regularized_sample_cost(loss, n, trace.output(), target);
        },
        h);
}

/// |a - b| / max(floor, |a|, |b|); the floor keeps near-zero components from
/// amplifying finite-difference noise.
inline double relative_error(double a, double b, double floor = 1.0) {
    return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)});
}

struct BundleDiff {
    double max_rel = 0.0;
    std::size_t layer = 0;
    bool in_weights = true;
    std::size_t offset = 0;
    double got = 0.0;
    double want = 0.0;
};

/// Worst relative disagreement between two bundles, with its location.
inline BundleDiff compare_bundles(const GradientBundle& a, const GradientBundle& b,
                                  double floor = 1.0) {
    if (!a.same_shape(b))
        throw ShapeError("compare_bundles: differently shaped bundles");
    BundleDiff worst;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        const auto scan = [&](const Vector& x, const Vector& y, bool weights) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double r = relative_error(x[i], y[i], floor);
                if (r > worst.max_rel)
                    worst = {r, l, weights, i, x[i], y[i]};
            }
        };
        scan(a.layers[l].weights, b.layers[l].weights, true);
        scan(a.layers[l].biases, b.layers[l].biases, false);
    }
    return worst;
}

/// Per-layer worst relative error (parameter-free layers report 0).
inline std::vector<double> per_layer_max_rel(const GradientBundle& a, const GradientBundle& b,
                                             double floor = 1.0) {
    if (!a.same_shape(b))
        throw ShapeError("per_layer_max_rel: differently shaped bundles");
    std::vector<double> out(a.layers.size(), 0.0);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        double m = 0.0;
        for (std::size_t i = 0; i < a.layers[l].weights.size(); ++i)
            m = std::max(m, relative_error(a.layers[l].weights[i], b.layers[l].weights[i], floor));
        for (std::size_t i = 0; i < a.layers[l].biases.size(); ++i)
            m = std::max(m, relative_error(a.layers[l].biases[i], b.layers[l].biases[i], floor));
        out[l] = m;
    }
    return out;
}

} // namespace gradforge
