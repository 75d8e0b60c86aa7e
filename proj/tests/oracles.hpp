#pragma once

// Independent reference computations used by the tests. These deliberately
// avoid the library's own code paths: naive loops, explicit inverses,
// exhaustive enumeration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "taper/graph.hpp"
#include "taper/tensor.hpp"

namespace oracles {

/// Plain triple-loop matrix multiply: y[n,out] = x[n,in] * w[out,in]^T + b.
inline taper::Tensor naive_dense(const taper::Tensor& x, const taper::Tensor& w,
                                 const taper::Tensor* b) {
    const std::size_t n = x.dim(0), in = x.dim(1), out = w.dim(0);
    taper::Tensor y({n, out});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < out; ++o) {
            double acc = b ? (*b)[o] : 0.0;
            for (std::size_t k = 0; k < in; ++k) acc += x[i * in + k] * w[o * in + k];
            y[i * out + o] = acc;
        }
    }
    return y;
}

/// im2col + matmul convolution reference.
inline taper::Tensor im2col_conv2d(const taper::Tensor& x, const taper::Tensor& w,
                                   const taper::Tensor* b, const taper::ConvMeta& meta) {
    const std::size_t n = x.dim(0), c_in = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const std::size_t h_out = (h + 2 * meta.padding - kh) / meta.stride + 1;
    const std::size_t w_out = (wd + 2 * meta.padding - kw) / meta.stride + 1;
    const std::size_t patch = c_in * kh * kw;
    const long pad = static_cast<long>(meta.padding);

    taper::Tensor y({n, c_out, h_out, w_out});
    for (std::size_t i = 0; i < n; ++i) {
        // columns[patch][h_out*w_out]
        std::vector<double> columns(patch * h_out * w_out, 0.0);
        for (std::size_t ci = 0; ci < c_in; ++ci) {
            for (std::size_t ky = 0; ky < kh; ++ky) {
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    const std::size_t row = (ci * kh + ky) * kw + kx;
                    for (std::size_t oy = 0; oy < h_out; ++oy) {
                        for (std::size_t ox = 0; ox < w_out; ++ox) {
                            const long iy = static_cast<long>(oy * meta.stride + ky) - pad;
                            const long ix = static_cast<long>(ox * meta.stride + kx) - pad;
                            double value = 0.0;
                            if (iy >= 0 && iy < static_cast<long>(h) && ix >= 0 &&
                                ix < static_cast<long>(wd)) {
                                value = x[((i * c_in + ci) * h + iy) * wd + ix];
                            }
                            columns[row * h_out * w_out + oy * w_out + ox] = value;
                        }
                    }
                }
            }
        }
        for (std::size_t co = 0; co < c_out; ++co) {
            for (std::size_t p = 0; p < h_out * w_out; ++p) {
                double acc = b ? (*b)[co] : 0.0;
                for (std::size_t r = 0; r < patch; ++r) {
                    acc += w[co * patch + r] * columns[r * h_out * w_out + p];
                }
                y[(i * c_out + co) * h_out * w_out + p] = acc;
            }
        }
    }
    return y;
}

/// Central finite differences of a scalar function of a parameter vector.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> params,
    double h = 1e-4) {
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const double fp = f(params);
        params[i] = keep - h;
        const double fm = f(params);
        params[i] = keep;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

inline double max_relative_error(const std::vector<double>& got,
                                 const std::vector<double>& want, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double scale = std::max({std::fabs(got[i]), std::fabs(want[i]), floor});
        worst = std::max(worst, std::fabs(got[i] - want[i]) / scale);
    }
    return worst;
}

/// Dense GP posterior via an explicit matrix inverse (Gauss-Jordan), no
/// Cholesky anywhere.
struct NaiveGp {
    std::vector<double> X;
    std::vector<double> y_norm;
    std::vector<double> inverse;  // (K + (alpha + jitter) I)^-1, row-major
    double y_mean = 0.0, y_std = 1.0;
    double length_scale = 1.0, signal_variance = 1.0;
};

inline std::vector<double> invert_matrix(std::vector<double> a, std::size_t n) {
    std::vector<double> inv(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        // partial pivot
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col])) pivot = r;
        }
        for (std::size_t k = 0; k < n; ++k) {
            std::swap(a[col * n + k], a[pivot * n + k]);
            std::swap(inv[col * n + k], inv[pivot * n + k]);
        }
        const double d = a[col * n + col];
        for (std::size_t k = 0; k < n; ++k) {
            a[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double factor = a[r * n + col];
            for (std::size_t k = 0; k < n; ++k) {
                a[r * n + k] -= factor * a[col * n + k];
                inv[r * n + k] -= factor * inv[col * n + k];
            }
        }
    }
    return inv;
}

inline double matern52_ref(double r, double l) {
    const double z = std::sqrt(5.0) * r / l;
    return (1.0 + z + z * z / 3.0) * std::exp(-z);
}

inline NaiveGp naive_gp_fit(const std::vector<double>& X, const std::vector<double>& y,
                            double noise, double length_scale = 1.0,
                            double signal_variance = 1.0, double jitter = 1e-6) {
    NaiveGp gp;
    gp.X = X;
    gp.length_scale = length_scale;
    gp.signal_variance = signal_variance;
    const std::size_t n = X.size();
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    gp.y_mean = mean;
    gp.y_std = var > 1e-24 ? std::sqrt(var) : 1.0;
    gp.y_norm.resize(n);
    for (std::size_t i = 0; i < n; ++i) gp.y_norm[i] = (y[i] - mean) / gp.y_std;

    std::vector<double> gram(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            gram[i * n + j] = signal_variance * matern52_ref(std::fabs(X[i] - X[j]), length_scale);
        }
        gram[i * n + i] += noise + jitter;
    }
    gp.inverse = invert_matrix(std::move(gram), n);
    return gp;
}

inline std::pair<double, double> naive_gp_predict(const NaiveGp& gp, double s) {
    const std::size_t n = gp.X.size();
    std::vector<double> k(n);
    for (std::size_t i = 0; i < n; ++i) {
        k[i] = gp.signal_variance * matern52_ref(std::fabs(s - gp.X[i]), gp.length_scale);
    }
    // mu = k^T K^-1 y,  var = k(s,s) - k^T K^-1 k
    std::vector<double> kinv(n, 0.0), alpha(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            kinv[i] += gp.inverse[i * n + j] * k[j];
            alpha[i] += gp.inverse[i * n + j] * gp.y_norm[j];
        }
    }
    double mu = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mu += k[i] * alpha[i];
        quad += k[i] * kinv[i];
    }
    double var = gp.signal_variance - quad;
    if (var < 0.0) var = 0.0;
    return {mu * gp.y_std + gp.y_mean, std::sqrt(var) * gp.y_std};
}

/// All k-element subsets of {0..n-1}.
inline std::vector<std::vector<std::size_t>> subsets_of_size(std::size_t n, std::size_t k) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> pick(k);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t depth) {
        if (depth == k) {
            out.push_back(pick);
            return;
        }
        for (std::size_t i = start; i < n; ++i) {
            pick[depth] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return out;
}

/// Exact decode of a finite binary16 bit pattern.
inline double decode_half_ref(std::uint16_t bits) {
    const double sign = (bits & 0x8000u) ? -1.0 : 1.0;
    const int e = (bits >> 10) & 0x1f;
    const int m = bits & 0x3ff;
    if (e == 0) return sign * std::ldexp(static_cast<double>(m), -24);
    return sign * std::ldexp(static_cast<double>(1024 + m), e - 25);
}

/// Brute-force binary16 rounding: nearest finite half value by scanning all
/// bit patterns, ties to the even mantissa. Values beyond the overflow
/// midpoint map to infinity.
inline double brute_force_half(double x) {
    if (std::fabs(x) >= 65520.0) {  // midpoint between 65504 and 2^16
        return x > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
    }
    double best = 0.0;
    double best_err = std::numeric_limits<double>::infinity();
    std::uint16_t best_bits = 0;
    for (std::uint32_t bits = 0; bits < 0x10000u; ++bits) {
        const std::uint16_t b = static_cast<std::uint16_t>(bits);
        if (((b >> 10) & 0x1f) == 0x1f) continue;  // skip inf/nan patterns
        const double v = decode_half_ref(b);
        const double err = std::fabs(v - x);
        const bool tie_even = err == best_err && (b & 1u) == 0 && (best_bits & 1u) != 0;
        if (err < best_err || tie_even) {
            best_err = err;
            best = v;
            best_bits = b;
        }
    }
    return best;
}

}  // namespace oracles
