// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef LENS_MATRIX_HPP
#define LENS_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lens/error.hpp"

namespace lens {

using Vec = std::vector<double>;

/// Dense row-major matrix of 64-bit floats. All model math runs in double;
/// weights are stored as f32 on disk and widened on load.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;  // rows * cols, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline bool all_finite(const Matrix& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

/// Per-row attention visibility table. allowed(q, k) means query position q
/// may attend to key position k.
struct AttentionMask {
    std::size_t n = 0;
    std::vector<std::uint8_t> allowed;  // n * n, row-major

    AttentionMask() = default;
    explicit AttentionMask(std::size_t n_, bool fill = false)
        : n(n_), allowed(n_ * n_, fill ? 1 : 0) {}

    bool at(std::size_t q, std::size_t k) const { return allowed[q * n + k] != 0; }
    void set(std::size_t q, std::size_t k, bool v) { allowed[q * n + k] = v ? 1 : 0; }

    bool operator==(const AttentionMask& o) const {
        return n == o.n && allowed == o.allowed;
    }
};

/// Product a*b with a fixed left-to-right summation over the inner
/// dimension. The summation order is part of the contract: slicing weight
/// columns and multiplying must reproduce the unsliced result bitwise when
/// the slice is complete.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        fail("matmul: shape mismatch (" + std::to_string(a.rows) + "x" +
             std::to_string(a.cols) + ") * (" + std::to_string(b.rows) + "x" +
             std::to_string(b.cols) + ")");
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

/// Row-wise softmax over the allowed entries only; disallowed entries are
/// exactly zero. A row with no allowed entry is malformed input.
inline Matrix masked_softmax_rows(const Matrix& scores, const AttentionMask& mask) {
    if (scores.rows != scores.cols || scores.rows != mask.n)
        fail("masked_softmax_rows: scores must be n x n matching the mask");
    const std::size_t n = mask.n;
    Matrix out(n, n);
    for (std::size_t q = 0; q < n; ++q) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k)
            if (mask.at(q, k)) mx = std::max(mx, scores(q, k));
        if (!std::isfinite(mx) && mx < 0)
            fail("masked_softmax_rows: row " + std::to_string(q) +
                 " has no allowed entries");
        double denom = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            if (mask.at(q, k)) denom += std::exp(scores(q, k) - mx);
        for (std::size_t k = 0; k < n; ++k)
            if (mask.at(q, k)) out(q, k) = std::exp(scores(q, k) - mx) / denom;
    }
    return out;
}

constexpr double kRmsEps = 1e-6;

/// Root-mean-square normalization: each row is scaled by
/// 1/sqrt(mean(x^2) + eps), then multiplied elementwise by the gain.
inline Matrix rms_norm(const Matrix& x, const Vec& gain) {
    if (gain.size() != x.cols)
        fail("rms_norm: gain length " + std::to_string(gain.size()) +
             " does not match cols " + std::to_string(x.cols));
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* xr = x.row(i);
        double ms = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) ms += xr[j] * xr[j];
        ms /= static_cast<double>(x.cols);
        const double scale = 1.0 / std::sqrt(ms + kRmsEps);
        double* orow = out.row(i);
        for (std::size_t j = 0; j < x.cols; ++j) orow[j] = xr[j] * scale * gain[j];
    }
    return out;
}

enum class Activation { relu, silu };

inline double apply_activation(double v, Activation kind) {
    switch (kind) {
        case Activation::relu: return v > 0.0 ? v : 0.0;
        case Activation::silu: return v / (1.0 + std::exp(-v));
    }
    return v;  // unreachable
}

inline Matrix activation(const Matrix& x, Activation kind) {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        out.data[i] = apply_activation(x.data[i], kind);
    return out;
}

inline Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "silu") return Activation::silu;
    fail("unknown activation '" + s + "' (expected relu or silu)");
}

inline std::string to_string(Activation a) {
    return a == Activation::relu ? "relu" : "silu";
}

}  // namespace lens

#endif  // LENS_MATRIX_HPP
