#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "gradforge/errors.hpp"
#include "gradforge/linalg.hpp"

namespace gradforge {

enum class Activation { Sigmoid, ReLU, LeakyReLU, Step, Identity };

/// Scalar nonlinearity tag; slope only meaningful for LeakyReLU.
struct ActivationKind {
    Activation tag = Activation::Sigmoid;
    double slope = 0.01;

    static ActivationKind sigmoid() { return {Activation::Sigmoid, 0.0}; }
    static ActivationKind relu() { return {Activation::ReLU, 0.0}; }
    static ActivationKind leaky_relu(double slope = 0.01) {
        if (!(slope > 0.0 && slope < 1.0))
            throw ConfigError("leaky_relu: slope must be in (0,1), got " + std::to_string(slope));
        return {Activation::LeakyReLU, slope};
    }
    static ActivationKind step() { return {Activation::Step, 0.0}; }
    static ActivationKind identity() { return {Activation::Identity, 0.0}; }

    bool operator==(const ActivationKind& o) const {
        return tag == o.tag && (tag != Activation::LeakyReLU || slope == o.slope);
    }
};

inline double sigmoid_scalar(double x) {
    // Split by sign so exp never overflows.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double apply_scalar(const ActivationKind& k, double z) {
    switch (k.tag) {
        case Activation::Sigmoid: return sigmoid_scalar(z);
        case Activation::ReLU: return z > 0.0 ? z : 0.0;
        case Activation::LeakyReLU: return z > 0.0 ? z : k.slope * z;
        case Activation::Step: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Identity: return z;
    }
    return z;
}

/// Derivative evaluated at the weighted input z. At the ReLU/leaky kink
/// (z == 0) the lower branch applies: 0 and slope respectively.
inline double derivative_scalar(const ActivationKind& k, double z) {
    switch (k.tag) {
        case Activation::Sigmoid: {
            const double s = sigmoid_scalar(z);
            return s * (1.0 - s);
        }
        case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
        case Activation::LeakyReLU: return z > 0.0 ? 1.0 : k.slope;
        case Activation::Step:
            throw ConfigError("step activation has no usable derivative; training with step is rejected");
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

inline Vector apply(const ActivationKind& k, const Vector& z) {
    Vector out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = apply_scalar(k, z[i]);
    return out;
}

inline Vector derivative(const ActivationKind& k, const Vector& z) {
    Vector out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = derivative_scalar(k, z[i]);
    return out;
}

/// exp-and-normalize, computed as e^{v_s - max(v)} so huge logits cannot
/// overflow. Components are positive and sum to one.
inline Vector softmax(const Vector& v) {
    Vector out(v.size());
    if (v.empty()) return out;
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

/// log(sum_i e^{v_i}) without leaving log space.
inline double log_sum_exp(const Vector& v) {
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - m);
    return m + std::log(sum);
}

/// Config/model-file spelling: sigmoid | relu | leaky_relu:0.01 | step | identity
inline std::string to_string(const ActivationKind& k) {
    switch (k.tag) {
        case Activation::Sigmoid: return "sigmoid";
        case Activation::ReLU: return "relu";
        case Activation::LeakyReLU: {
            char buf[48];
            std::snprintf(buf, sizeof buf, "leaky_relu:%g", k.slope);
            return buf;
        }
        case Activation::Step: return "step";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

inline ActivationKind parse_activation(const std::string& s) {
    if (s == "sigmoid") return ActivationKind::sigmoid();
    if (s == "relu") return ActivationKind::relu();
    if (s == "step") return ActivationKind::step();
    if (s == "identity") return ActivationKind::identity();
    if (s.rfind("leaky_relu", 0) == 0) {
        double slope = 0.01;
        if (s.size() > 10) {
            if (s[10] != ':')
                throw ParseError("unknown activation '" + s + "'");
            try {
                slope = std::stod(s.substr(11));
            } catch (const std::exception&) {
                throw ParseError("bad leaky_relu slope in '" + s + "'");
            }
        }
        return ActivationKind::leaky_relu(slope);
    }
    throw ParseError("unknown activation '" + s + "'");
}

} // namespace gradforge
