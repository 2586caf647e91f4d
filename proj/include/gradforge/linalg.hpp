#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gradforge/errors.hpp"

namespace gradforge {

using Vector = std::vector<double>;

/// Dense row-major matrix. Entry (j,k) weights input k into output j, so a
/// gradient outer product writes straight into storage order.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // rows * cols entries, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> d)
        : rows(r), cols(c), data(std::move(d)) {
        if (data.size() != rows * cols)
            throw ShapeError("Matrix: " + std::to_string(rows) + "x" + std::to_string(cols) +
                             " needs " + std::to_string(rows * cols) + " entries, got " +
                             std::to_string(data.size()));
    }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

/// result_j = sum_k W_jk a_k
inline void matvec_into(const Matrix& w, const Vector& a, Vector& out) {
    if (w.cols != a.size())
        throw ShapeError("matvec: matrix is " + shape_str(w) + " but vector has length " +
                         std::to_string(a.size()));
    out.assign(w.rows, 0.0);
    const double* row = w.data.data();
    for (std::size_t j = 0; j < w.rows; ++j, row += w.cols) {
        double s = 0.0;
        for (std::size_t k = 0; k < w.cols; ++k) s += row[k] * a[k];
        out[j] = s;
    }
}

inline Vector matvec(const Matrix& w, const Vector& a) {
    Vector out;
    matvec_into(w, a, out);
    return out;
}

/// result_k = sum_j W_jk d_j, i.e. W^T d without materializing the transpose.
inline void matvec_transpose_into(const Matrix& w, const Vector& d, Vector& out) {
    if (w.rows != d.size())
        throw ShapeError("matvec_transpose: matrix is " + shape_str(w) +
                         " but vector has length " + std::to_string(d.size()));
    out.assign(w.cols, 0.0);
    const double* row = w.data.data();
    for (std::size_t j = 0; j < w.rows; ++j, row += w.cols) {
        const double dj = d[j];
        for (std::size_t k = 0; k < w.cols; ++k) out[k] += row[k] * dj;
    }
}

inline Vector matvec_transpose(const Matrix& w, const Vector& d) {
    Vector out;
    matvec_transpose_into(w, d, out);
    return out;
}

inline Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) t(c, r) = m(r, c);
    return t;
}

/// Componentwise product (x o y)_i = x_i * y_i.
inline Vector hadamard(const Vector& x, const Vector& y) {
    if (x.size() != y.size())
        throw ShapeError("hadamard: vectors have lengths " + std::to_string(x.size()) +
                         " and " + std::to_string(y.size()));
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
    return out;
}

/// result_jk = u_j * v_k, shape u.len x v.len.
inline Matrix outer(const Vector& u, const Vector& v) {
    Matrix m(u.size(), v.size());
    std::size_t idx = 0;
    for (std::size_t j = 0; j < u.size(); ++j)
        for (std::size_t k = 0; k < v.size(); ++k) m.data[idx++] = u[j] * v[k];
    return m;
}

/// Squared Euclidean norm sum_i v_i^2.
inline double sq_norm(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline Vector sub(const Vector& x, const Vector& y) {
    if (x.size() != y.size())
        throw ShapeError("sub: vectors have lengths " + std::to_string(x.size()) + " and " +
                         std::to_string(y.size()));
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
    return out;
}

inline void scale_in_place(Vector& v, double c) {
    for (double& x : v) x *= c;
}

/// y += c * x
inline void axpy(Vector& y, double c, const Vector& x) {
    if (x.size() != y.size())
        throw ShapeError("axpy: vectors have lengths " + std::to_string(y.size()) + " and " +
                         std::to_string(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

} // namespace gradforge
