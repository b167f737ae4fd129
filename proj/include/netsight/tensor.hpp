#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "netsight/error.hpp"

namespace netsight {

using Vec = std::vector<double>;

/// Dense row-major matrix. Deliberately minimal: the autoencoder only needs
/// matrix-vector products in both orientations and rank-one updates.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    [[nodiscard]] double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    [[nodiscard]] double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    [[nodiscard]] std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    [[nodiscard]] std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

[[nodiscard]] inline double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

[[nodiscard]] inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

[[nodiscard]] inline bool all_finite(std::span<const double> a) {
    for (double v : a) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

/// y = W x + b
inline void affine(const Matrix& w, std::span<const double> b, std::span<const double> x, std::span<double> y) {
    for (std::size_t r = 0; r < w.rows; ++r) {
        y[r] = b[r] + dot(w.row(r), x);
    }
}

/// Cosine similarity a.b / (|a||b|), clamped to [-1, 1] against rounding.
/// Throws SimilarityError when either vector has zero norm.
[[nodiscard]] inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ContractError("cosine_similarity: length mismatch " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
    }
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) {
        throw SimilarityError("cosine_similarity: zero-norm vector");
    }
    const double c = dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

/// Unit-normalized copy plus the original norm.
struct Normalized {
    Vec unit;
    double length = 0.0;
};

[[nodiscard]] inline Normalized normalized(std::span<const double> v) {
    Normalized out{Vec(v.begin(), v.end()), norm(v)};
    if (out.length > 0.0) {
        for (double& x : out.unit) x /= out.length;
    }
    return out;
}

/// Accumulates d cos(a, b) / d a scaled by `coeff` into `grad_a`, given the
/// unit vectors of a and b, the cosine between them, and |a|.
inline void add_cosine_grad(std::span<const double> unit_a, std::span<const double> unit_b, double cos_ab,
                            double norm_a, double coeff, std::span<double> grad_a) {
    const double scale = coeff / norm_a;
    for (std::size_t k = 0; k < grad_a.size(); ++k) {
        grad_a[k] += scale * (unit_b[k] - cos_ab * unit_a[k]);
    }
}

/// Numerically stable log(sum(exp(v))).
[[nodiscard]] inline double log_sum_exp(std::span<const double> v) {
    double m = -INFINITY;
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace netsight
