#pragma once

#include "taper/graph.hpp"
#include "taper/tensor.hpp"

namespace taper {

// Batched layer kernels. Inputs carry a leading batch dimension.

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor* b);
void dense_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, Tensor& grad_in,
                    Tensor& grad_w, Tensor* grad_b);

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* b, const ConvMeta& meta);
void conv2d_backward(const Tensor& x, const Tensor& w, const ConvMeta& meta,
                     const Tensor& grad_out, Tensor& grad_in, Tensor& grad_w, Tensor* grad_b);

Tensor relu_forward(const Tensor& x);
void relu_backward(const Tensor& x, const Tensor& grad_out, Tensor& grad_in);

Tensor flatten_forward(const Tensor& x);

Tensor add_forward(const Tensor& a, const Tensor& b);

}  // namespace taper
