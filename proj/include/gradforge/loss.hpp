#pragma once

#include <cmath>
#include <string>
#include <variant>

#include "gradforge/activation.hpp"
#include "gradforge/data.hpp"
#include "gradforge/errors.hpp"
#include "gradforge/linalg.hpp"
#include "gradforge/network.hpp"

namespace gradforge {

enum class Loss { Quadratic, SoftmaxLogLoss };

struct LossKind {
    Loss tag = Loss::Quadratic;
    double lambda = 0.0; // L2 strength; 0 disables

    static LossKind quadratic(double lambda = 0.0) { return make(Loss::Quadratic, lambda); }
    static LossKind softmax_log_loss(double lambda = 0.0) {
        return make(Loss::SoftmaxLogLoss, lambda);
    }

private:
    static LossKind make(Loss tag, double lambda) {
        if (!(lambda >= 0.0))
            throw ConfigError("loss: lambda must be nonnegative, got " + std::to_string(lambda));
        return {tag, lambda};
    }
};

inline std::string to_string(const LossKind& k) {
    return k.tag == Loss::Quadratic ? "quadratic" : "softmax_log_loss";
}

inline Loss parse_loss(const std::string& s) {
    if (s == "quadratic") return Loss::Quadratic;
    if (s == "softmax_log_loss") return Loss::SoftmaxLogLoss;
    throw ParseError("unknown loss '" + s + "'");
}

/// Quadratic cost targets a vector; softmax log loss targets a class label.
using Target = std::variant<Vector, std::size_t>;

inline const Vector& target_vector(const Target& t) {
    if (const auto* v = std::get_if<Vector>(&t)) return *v;
    throw ConfigError("quadratic cost needs a vector target, got a class label");
}

inline std::size_t target_label(const Target& t) {
    if (const auto* l = std::get_if<std::size_t>(&t)) return *l;
    throw ConfigError("softmax log loss needs a class label target, got a vector");
}

inline Target target_for(const LossKind& kind, const LabeledDataset& data, std::size_t i) {
    if (kind.tag == Loss::Quadratic) return data.one_hot(i);
    return data.labels[i];
}

/// Per-sample data cost, no regularization: 1/2 ||y - a||^2 for the
/// quadratic kind, logsumexp(v) - v_label for softmax log loss (log space,
/// never an explicit softmax division).
inline double sample_cost(const LossKind& kind, const Vector& output, const Target& target) {
    if (kind.tag == Loss::Quadratic) {
        const Vector& y = target_vector(target);
        if (y.size() != output.size())
            throw ShapeError("sample_cost: output has length " + std::to_string(output.size()) +
                             " but target has length " + std::to_string(y.size()));
        return 0.5 * sq_norm(sub(output, y));
    }
    const std::size_t label = target_label(target);
    if (label >= output.size())
        throw DomainError("sample_cost: label " + std::to_string(label) +
                          " out of range for output of length " + std::to_string(output.size()));
    return log_sum_exp(output) - output[label];
}

/// Sum of squared weight entries over every parameterized layer (Frobenius
/// norm squared); biases excluded.
inline double weight_penalty(const NetworkSpec& net) {
    double s = 0.0;
    for (const Layer& layer : net.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer))
            s += sq_norm(d->weights.data);
        else if (const auto* c = std::get_if<ConvLayer>(&layer))
            s += sq_norm(c->filters.data);
    }
    return s;
}

/// Per-sample cost including the penalty at single-sample scale:
/// sample_cost + lambda * weight_penalty. Averaging this over the dataset
/// reproduces the dataset cost below, so the per-sample gradient is exactly
/// what one stochastic step needs.
inline double regularized_sample_cost(const LossKind& kind, const NetworkSpec& net,
                                      const Vector& output, const Target& target) {
    double c = sample_cost(kind, output, target);
    if (kind.lambda > 0.0) c += kind.lambda * weight_penalty(net);
    return c;
}

/// Mean sample cost over the dataset plus (lambda/N) * sum_l ||W^[l]||_F^2.
inline double dataset_cost(const LossKind& kind, const NetworkSpec& net,
                           const LabeledDataset& data) {
    if (data.empty()) throw DomainError("dataset_cost: empty dataset");
    double s = 0.0;
    ForwardTrace trace;
    for (std::size_t i = 0; i < data.size(); ++i) {
        forward_into(net, data.inputs[i], trace);
        s += sample_cost(kind, trace.output(), target_for(kind, data, i));
    }
    const double n = static_cast<double>(data.size());
    double cost = s / n;
    if (kind.lambda > 0.0) cost += kind.lambda * weight_penalty(net) / n;
    return cost;
}

/// delta at the output layer, dC/dz^[L].
/// Quadratic: sigma'(z^[L]) o (a^[L] - y).
/// SoftmaxLogLoss: softmax(a^[L]) - onehot(label); requires the final layer
/// to emit raw scores (Identity activation) so the nonlinearity is not
/// applied twice.
inline Vector output_delta(const LossKind& kind, const NetworkSpec& net,
                           const ForwardTrace& trace, const Target& target) {
    const Vector& out = trace.output();
    const Vector& z = trace.weighted_inputs.back();
    const Vector* mask =
        trace.dropout_masks.empty() || trace.dropout_masks.back().empty()
            ? nullptr
            : &trace.dropout_masks.back();
    const ActivationKind act = layer_activation(net.layers.back());
    Vector d;
    if (kind.tag == Loss::Quadratic) {
        const Vector& y = target_vector(target);
        if (y.size() != out.size())
            throw ShapeError("output_delta: output has length " + std::to_string(out.size()) +
                             " but target has length " + std::to_string(y.size()));
        d.resize(out.size());
        for (std::size_t j = 0; j < out.size(); ++j)
            d[j] = derivative_scalar(act, z[j]) * (out[j] - y[j]);
    } else {
        if (act.tag != Activation::Identity)
            throw ConfigError("softmax log loss requires an identity output activation, got " +
                              to_string(act));
        const std::size_t label = target_label(target);
        if (label >= out.size())
            throw DomainError("output_delta: label " + std::to_string(label) +
                              " out of range for output of length " + std::to_string(out.size()));
        d = softmax(out);
        d[label] -= 1.0;
    }
    if (mask)
        for (std::size_t j = 0; j < d.size(); ++j) d[j] *= (*mask)[j];
    return d;
}

} // namespace gradforge
