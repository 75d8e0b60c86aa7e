#include "taper/layer.hpp"

#include <algorithm>

#include "taper/error.hpp"

namespace taper {

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor* b) {
    const std::size_t n = x.dim(0);
    const std::size_t in = w.dim(1);
    const std::size_t out = w.dim(0);
    Tensor y({n, out});
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data() + i * in;
        double* yi = y.data() + i * out;
        for (std::size_t o = 0; o < out; ++o) {
            const double* wo = w.data() + o * in;
            double acc = b ? (*b)[o] : 0.0;
            for (std::size_t k = 0; k < in; ++k) acc += wo[k] * xi[k];
            yi[o] = acc;
        }
    }
    return y;
}

void dense_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, Tensor& grad_in,
                    Tensor& grad_w, Tensor* grad_b) {
    const std::size_t n = x.dim(0);
    const std::size_t in = w.dim(1);
    const std::size_t out = w.dim(0);
    grad_in = Tensor({n, in});
    grad_w = Tensor({out, in});
    if (grad_b) *grad_b = Tensor({out});
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data() + i * in;
        const double* gyi = grad_out.data() + i * out;
        double* gxi = grad_in.data() + i * in;
        for (std::size_t o = 0; o < out; ++o) {
            const double g = gyi[o];
            const double* wo = w.data() + o * in;
            double* gwo = grad_w.data() + o * in;
            for (std::size_t k = 0; k < in; ++k) {
                gxi[k] += g * wo[k];
                gwo[k] += g * xi[k];
            }
            if (grad_b) (*grad_b)[o] += g;
        }
    }
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* b, const ConvMeta& meta) {
    const std::size_t n = x.dim(0), c_in = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const std::size_t h_out = (h + 2 * meta.padding - kh) / meta.stride + 1;
    const std::size_t w_out = (wd + 2 * meta.padding - kw) / meta.stride + 1;
    Tensor y({n, c_out, h_out, w_out});
    const long pad = static_cast<long>(meta.padding);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t co = 0; co < c_out; ++co) {
            const double bias = b ? (*b)[co] : 0.0;
            for (std::size_t oy = 0; oy < h_out; ++oy) {
                for (std::size_t ox = 0; ox < w_out; ++ox) {
                    double acc = bias;
                    const long y0 = static_cast<long>(oy * meta.stride) - pad;
                    const long x0 = static_cast<long>(ox * meta.stride) - pad;
                    for (std::size_t ci = 0; ci < c_in; ++ci) {
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            const long iy = y0 + static_cast<long>(ky);
                            if (iy < 0 || iy >= static_cast<long>(h)) continue;
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const long ix = x0 + static_cast<long>(kx);
                                if (ix < 0 || ix >= static_cast<long>(wd)) continue;
                                acc += w[((co * c_in + ci) * kh + ky) * kw + kx] *
                                       x[((i * c_in + ci) * h + iy) * wd + ix];
                            }
                        }
                    }
                    y[((i * c_out + co) * h_out + oy) * w_out + ox] = acc;
                }
            }
        }
    }
    return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const ConvMeta& meta,
                     const Tensor& grad_out, Tensor& grad_in, Tensor& grad_w, Tensor* grad_b) {
    const std::size_t n = x.dim(0), c_in = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const std::size_t h_out = grad_out.dim(2), w_out = grad_out.dim(3);
    grad_in = Tensor({n, c_in, h, wd});
    grad_w = Tensor({c_out, c_in, kh, kw});
    if (grad_b) *grad_b = Tensor({c_out});
    const long pad = static_cast<long>(meta.padding);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t co = 0; co < c_out; ++co) {
            for (std::size_t oy = 0; oy < h_out; ++oy) {
                for (std::size_t ox = 0; ox < w_out; ++ox) {
                    const double g = grad_out[((i * c_out + co) * h_out + oy) * w_out + ox];
                    if (grad_b) (*grad_b)[co] += g;
                    const long y0 = static_cast<long>(oy * meta.stride) - pad;
                    const long x0 = static_cast<long>(ox * meta.stride) - pad;
                    for (std::size_t ci = 0; ci < c_in; ++ci) {
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            const long iy = y0 + static_cast<long>(ky);
                            if (iy < 0 || iy >= static_cast<long>(h)) continue;
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const long ix = x0 + static_cast<long>(kx);
                                if (ix < 0 || ix >= static_cast<long>(wd)) continue;
                                const std::size_t wi = ((co * c_in + ci) * kh + ky) * kw + kx;
                                const std::size_t xi = ((i * c_in + ci) * h + iy) * wd + ix;
                                grad_in[xi] += g * w[wi];
                                grad_w[wi] += g * x[xi];
                            }
                        }
                    }
                }
            }
        }
    }
}

Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.values()) v = std::max(v, 0.0);
    return y;
}

void relu_backward(const Tensor& x, const Tensor& grad_out, Tensor& grad_in) {
    grad_in = grad_out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 0.0) grad_in[i] = 0.0;
    }
}

Tensor flatten_forward(const Tensor& x) {
    std::size_t n = x.dim(0);
    return x.reshaped({n, x.size() / n});
}

Tensor add_forward(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw Error("add inputs disagree: " + shape_str(a.shape()) + " vs " +
                    shape_str(b.shape()));
    }
    Tensor y = a;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
    return y;
}

}  // namespace taper
