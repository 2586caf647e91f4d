#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gradforge/activation.hpp"
#include "gradforge/errors.hpp"
#include "gradforge/linalg.hpp"

namespace gradforge {

struct Shape3 {
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t channels = 1;

    std::size_t volume() const { return height * width * channels; }
    bool operator==(const Shape3&) const = default;
};

inline std::string to_string(const Shape3& s) {
    return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
           std::to_string(s.channels);
}

/// Dense numeric block in (row, col, channel) order:
/// index = (r * width + c) * channels + ch.
struct Tensor3 {
    Shape3 shape;
    Vector data;

    Tensor3() = default;
    explicit Tensor3(Shape3 s) : shape(s), data(s.volume(), 0.0) {}
    Tensor3(Shape3 s, Vector d) : shape(s), data(std::move(d)) {
        if (data.size() != shape.volume())
            throw ShapeError("Tensor3: shape " + to_string(shape) + " needs " +
                             std::to_string(shape.volume()) + " entries, got " +
                             std::to_string(data.size()));
    }

    double& at(std::size_t r, std::size_t c, std::size_t ch) {
        return data[(r * shape.width + c) * shape.channels + ch];
    }
    double at(std::size_t r, std::size_t c, std::size_t ch) const {
        return data[(r * shape.width + c) * shape.channels + ch];
    }
};

/// Filter bank laid out as (fh, fw, in_channels, out_channels):
/// index = ((i * fw + j) * in_channels + ci) * out_channels + co.
struct Filter4 {
    std::size_t fh = 0, fw = 0, in_channels = 0, out_channels = 0;
    Vector data;

    Filter4() = default;
    Filter4(std::size_t h, std::size_t w, std::size_t ic, std::size_t oc)
        : fh(h), fw(w), in_channels(ic), out_channels(oc), data(h * w * ic * oc, 0.0) {}

    std::size_t size() const { return fh * fw * in_channels * out_channels; }
    double& at(std::size_t i, std::size_t j, std::size_t ci, std::size_t co) {
        return data[((i * fw + j) * in_channels + ci) * out_channels + co];
    }
    double at(std::size_t i, std::size_t j, std::size_t ci, std::size_t co) const {
        return data[((i * fw + j) * in_channels + ci) * out_channels + co];
    }
};

struct ConvLayer {
    Filter4 filters;
    Vector biases; // one per output channel
    std::size_t stride = 1;
    std::size_t zero_pad = 0; // zeros added on every border
    ActivationKind activation = ActivationKind::identity();
};

enum class PoolMode { Max, Average };

struct PoolLayer {
    PoolMode mode = PoolMode::Max;
    std::size_t window = 2;
    std::size_t stride = 2;
};

/// floor((in + pads - filter) / stride) + 1; throws if no placement fits.
inline std::size_t conv_out_dim(std::size_t in, std::size_t filter, std::size_t stride,
                                std::size_t pad_total, const char* what) {
    const std::size_t padded = in + pad_total;
    if (filter == 0 || stride == 0)
        throw ShapeError(std::string(what) + ": filter and stride must be positive");
    if (padded < filter)
        throw ShapeError(std::string(what) + ": filter of length " + std::to_string(filter) +
                         " does not fit input of padded length " + std::to_string(padded));
    return (padded - filter) / stride + 1;
}

/// Zero padding for the 1-D operation; the two sides are independent so the
/// single trailing zero of the strided example can be expressed.
struct Pad1d {
    std::size_t left = 0;
    std::size_t right = 0;

    static Pad1d both(std::size_t p) { return {p, p}; }
    std::size_t total() const { return left + right; }
};

/// Slides the filter taps over the zero-padded input, advancing by `stride`:
/// y_i = sum_j filter_j * padded(i*stride + j). With taps given in the order
/// they appear in a band row, this is the convolution sum y_k = sum_n x_n
/// g_{k-n} for the signal g_0 = filter_0, g_{-1} = filter_1, ...
inline Vector conv1d(const Vector& x, const Vector& filter, std::size_t stride,
                     Pad1d pad = {}) {
    const std::size_t out_len =
        conv_out_dim(x.size(), filter.size(), stride, pad.total(), "conv1d");
    Vector out(out_len, 0.0);
    for (std::size_t i = 0; i < out_len; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < filter.size(); ++j) {
            const std::size_t p = i * stride + j; // position in padded input
            if (p < pad.left) continue;
            const std::size_t src = p - pad.left;
            if (src >= x.size()) continue;
            s += filter[j] * x[src];
        }
        out[i] = s;
    }
    return out;
}

/// The banded matrix realizing conv1d on the zero-padded input: row i holds
/// the filter taps starting at column i*stride, so
/// matvec(M, padded(x)) == conv1d(x, filter, stride, pad).
/// Columns count the padded length input_len + pad.left + pad.right.
inline Matrix conv1d_as_matrix(std::size_t input_len, const Vector& filter,
                               std::size_t stride, Pad1d pad = {}) {
    const std::size_t out_len =
        conv_out_dim(input_len, filter.size(), stride, pad.total(), "conv1d_as_matrix");
    Matrix m(out_len, input_len + pad.total());
    for (std::size_t i = 0; i < out_len; ++i)
        for (std::size_t j = 0; j < filter.size(); ++j) m(i, i * stride + j) = filter[j];
    return m;
}

inline Vector pad_vector(const Vector& x, Pad1d pad) {
    Vector out(pad.left + x.size() + pad.right, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) out[pad.left + i] = x[i];
    return out;
}

inline Shape3 conv_out_shape(const ConvLayer& layer, const Shape3& in) {
    if (in.channels != layer.filters.in_channels)
        throw ShapeError("conv: input has " + std::to_string(in.channels) +
                         " channels but filters expect " +
                         std::to_string(layer.filters.in_channels));
    if (layer.biases.size() != layer.filters.out_channels)
        throw ShapeError("conv: " + std::to_string(layer.filters.out_channels) +
                         " output channels but " + std::to_string(layer.biases.size()) +
                         " biases");
    const std::size_t oh = conv_out_dim(in.height, layer.filters.fh, layer.stride,
                                        2 * layer.zero_pad, "conv rows");
    const std::size_t ow = conv_out_dim(in.width, layer.filters.fw, layer.stride,
                                        2 * layer.zero_pad, "conv cols");
    return {oh, ow, layer.filters.out_channels};
}

/// Pre-activation response: cross-correlation of the filter bank with the
/// zero-padded input plus the per-channel bias. The componentwise
/// nonlinearity is applied by the caller so backward can see these values.
inline Tensor3 conv2d_preactivation(const ConvLayer& layer, const Tensor3& input) {
    const Shape3 out_shape = conv_out_shape(layer, input.shape);
    Tensor3 out(out_shape);
    const Filter4& f = layer.filters;
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(layer.zero_pad);
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(input.shape.height);
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(input.shape.width);

    for (std::size_t orow = 0; orow < out_shape.height; ++orow) {
        const std::ptrdiff_t base_r = static_cast<std::ptrdiff_t>(orow * layer.stride) - pad;
        for (std::size_t ocol = 0; ocol < out_shape.width; ++ocol) {
            const std::ptrdiff_t base_c =
                static_cast<std::ptrdiff_t>(ocol * layer.stride) - pad;
            for (std::size_t o = 0; o < f.out_channels; ++o)
                out.at(orow, ocol, o) = layer.biases[o];
            for (std::size_t i = 0; i < f.fh; ++i) {
                const std::ptrdiff_t r = base_r + static_cast<std::ptrdiff_t>(i);
                if (r < 0 || r >= h) continue;
                for (std::size_t j = 0; j < f.fw; ++j) {
                    const std::ptrdiff_t c = base_c + static_cast<std::ptrdiff_t>(j);
                    if (c < 0 || c >= w) continue;
                    for (std::size_t ci = 0; ci < f.in_channels; ++ci) {
                        const double v = input.at(static_cast<std::size_t>(r),
                                                  static_cast<std::size_t>(c), ci);
                        for (std::size_t o = 0; o < f.out_channels; ++o)
                            out.at(orow, ocol, o) += f.at(i, j, ci, o) * v;
                    }
                }
            }
        }
    }
    return out;
}

inline Tensor3 conv2d_forward(const ConvLayer& layer, const Tensor3& input) {
    Tensor3 z = conv2d_preactivation(layer, input);
    Tensor3 out(z.shape);
    for (std::size_t i = 0; i < z.data.size(); ++i)
        out.data[i] = apply_scalar(layer.activation, z.data[i]);
    return out;
}

inline Shape3 pool_out_shape(const PoolLayer& layer, const Shape3& in) {
    const std::size_t oh =
        conv_out_dim(in.height, layer.window, layer.stride, 0, "pool rows");
    const std::size_t ow = conv_out_dim(in.width, layer.window, layer.stride, 0, "pool cols");
    return {oh, ow, in.channels};
}

/// For max pooling, the flat input index that won each output cell; backward
/// routes the whole delta there. Empty for average pooling.
struct PoolTrace {
    std::vector<std::size_t> argmax;
};

inline std::pair<Tensor3, PoolTrace> pool_forward(const PoolLayer& layer,
                                                  const Tensor3& input) {
    const Shape3 out_shape = pool_out_shape(layer, input.shape);
    Tensor3 out(out_shape);
    PoolTrace trace;
    if (layer.mode == PoolMode::Max) trace.argmax.resize(out_shape.volume());

    const double inv_count = 1.0 / static_cast<double>(layer.window * layer.window);
    for (std::size_t orow = 0; orow < out_shape.height; ++orow) {
        for (std::size_t ocol = 0; ocol < out_shape.width; ++ocol) {
            for (std::size_t ch = 0; ch < out_shape.channels; ++ch) {
                const std::size_t r0 = orow * layer.stride;
                const std::size_t c0 = ocol * layer.stride;
                if (layer.mode == PoolMode::Max) {
                    double best = input.at(r0, c0, ch);
                    std::size_t best_idx = (r0 * input.shape.width + c0) * input.shape.channels + ch;
                    for (std::size_t i = 0; i < layer.window; ++i)
                        for (std::size_t j = 0; j < layer.window; ++j) {
                            const double v = input.at(r0 + i, c0 + j, ch);
                            if (v > best) { // strict: ties keep the first, row-major
                                best = v;
                                best_idx = ((r0 + i) * input.shape.width + (c0 + j)) *
                                               input.shape.channels + ch;
                            }
                        }
                    out.at(orow, ocol, ch) = best;
                    trace.argmax[(orow * out_shape.width + ocol) * out_shape.channels + ch] =
                        best_idx;
                } else {
                    double s = 0.0;
                    for (std::size_t i = 0; i < layer.window; ++i)
                        for (std::size_t j = 0; j < layer.window; ++j)
                            s += input.at(r0 + i, c0 + j, ch);
                    out.at(orow, ocol, ch) = s * inv_count;
                }
            }
        }
    }
    return {std::move(out), std::move(trace)};
}

struct ConvGrads {
    Vector filter_grads; // same flat layout as Filter4::data
    Vector bias_grads;   // one per output channel
    Tensor3 input_delta; // dC/d(input activations)
};

/// Jacobian-transpose pass for the convolution. `delta` is dC/dz at this
/// layer (activation derivative already folded in by the caller).
inline ConvGrads conv_backward(const ConvLayer& layer, const Tensor3& input,
                               const Tensor3& delta) {
    const Shape3 out_shape = conv_out_shape(layer, input.shape);
    if (!(delta.shape == out_shape))
        throw ShapeError("conv_backward: delta shape " + to_string(delta.shape) +
                         " does not match forward output " + to_string(out_shape));

    const Filter4& f = layer.filters;
    ConvGrads g;
    g.filter_grads.assign(f.size(), 0.0);
    g.bias_grads.assign(f.out_channels, 0.0);
    g.input_delta = Tensor3(input.shape);

    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(layer.zero_pad);
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(input.shape.height);
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(input.shape.width);

    for (std::size_t orow = 0; orow < out_shape.height; ++orow) {
        const std::ptrdiff_t base_r = static_cast<std::ptrdiff_t>(orow * layer.stride) - pad;
        for (std::size_t ocol = 0; ocol < out_shape.width; ++ocol) {
            const std::ptrdiff_t base_c =
                static_cast<std::ptrdiff_t>(ocol * layer.stride) - pad;
            for (std::size_t o = 0; o < f.out_channels; ++o)
                g.bias_grads[o] += delta.at(orow, ocol, o);
            for (std::size_t i = 0; i < f.fh; ++i) {
                const std::ptrdiff_t r = base_r + static_cast<std::ptrdiff_t>(i);
                if (r < 0 || r >= h) continue;
                for (std::size_t j = 0; j < f.fw; ++j) {
                    const std::ptrdiff_t c = base_c + static_cast<std::ptrdiff_t>(j);
                    if (c < 0 || c >= w) continue;
                    for (std::size_t ci = 0; ci < f.in_channels; ++ci) {
                        const std::size_t rr = static_cast<std::size_t>(r);
                        const std::size_t cc = static_cast<std::size_t>(c);
                        const double a = input.at(rr, cc, ci);
                        double back = 0.0;
                        const std::size_t fbase = ((i * f.fw + j) * f.in_channels + ci) *
                                                  f.out_channels;
                        for (std::size_t o = 0; o < f.out_channels; ++o) {
                            const double d = delta.at(orow, ocol, o);
                            g.filter_grads[fbase + o] += d * a;
                            back += f.data[fbase + o] * d;
                        }
                        g.input_delta.at(rr, cc, ci) += back;
                    }
                }
            }
        }
    }
    return g;
}

/// Max pooling sends each delta to its recorded argmax; average pooling
/// spreads it uniformly over the window.
inline Tensor3 pool_backward(const PoolLayer& layer, const Shape3& input_shape,
                             const PoolTrace& trace, const Tensor3& upstream) {
    const Shape3 out_shape = pool_out_shape(layer, input_shape);
    if (!(upstream.shape == out_shape))
        throw ShapeError("pool_backward: delta shape " + to_string(upstream.shape) +
                         " does not match forward output " + to_string(out_shape));
    Tensor3 out(input_shape);
    if (layer.mode == PoolMode::Max) {
        if (trace.argmax.size() != out_shape.volume())
            throw ShapeError("pool_backward: trace has " + std::to_string(trace.argmax.size()) +
                             " entries, expected " + std::to_string(out_shape.volume()));
        for (std::size_t k = 0; k < upstream.data.size(); ++k)
            out.data[trace.argmax[k]] += upstream.data[k];
    } else {
        const double inv_count = 1.0 / static_cast<double>(layer.window * layer.window);
        for (std::size_t orow = 0; orow < out_shape.height; ++orow)
            for (std::size_t ocol = 0; ocol < out_shape.width; ++ocol)
                for (std::size_t ch = 0; ch < out_shape.channels; ++ch) {
                    const double d = upstream.at(orow, ocol, ch) * inv_count;
                    for (std::size_t i = 0; i < layer.window; ++i)
                        for (std::size_t j = 0; j < layer.window; ++j)
                            out.at(orow * layer.stride + i, ocol * layer.stride + j, ch) += d;
                }
    }
    return out;
}

} // namespace gradforge
