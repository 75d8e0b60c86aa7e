#include "taper/net.hpp"

#include <cmath>

#include "taper/error.hpp"
#include "taper/layer.hpp"

namespace taper {

namespace {

Tensor node_forward(const LayerSpec& node, const Tensor& x, const Tensor* x2) {
    switch (node.kind) {
        case LayerKind::Dense:
            if (x.rank() != 2 || x.dim(1) != node.weights->dim(1)) {
                throw Error("layer '" + node.name + "': expected input [n, " +
                            std::to_string(node.weights->dim(1)) + "], got " +
                            shape_str(x.shape()));
            }
            return dense_forward(x, *node.weights, node.bias ? &*node.bias : nullptr);
        case LayerKind::Conv2d:
            if (x.rank() != 4 || x.dim(1) != node.weights->dim(1)) {
                throw Error("layer '" + node.name + "': expected input [n, " +
                            std::to_string(node.weights->dim(1)) + ", h, w], got " +
                            shape_str(x.shape()));
            }
            return conv2d_forward(x, *node.weights, node.bias ? &*node.bias : nullptr, node.conv);
        case LayerKind::ReLU:
            return relu_forward(x);
        case LayerKind::Flatten:
            return flatten_forward(x);
        case LayerKind::Add:
            return add_forward(x, *x2);
    }
    throw Error("unreachable layer kind");
}

std::vector<Tensor> run_forward(const ModelGraph& model, const Tensor& batch) {
    if (batch.rank() < 2) {
        throw Error("batch must have a leading batch dimension, got " + shape_str(batch.shape()));
    }
    std::vector<std::size_t> sample_shape(batch.shape().begin() + 1, batch.shape().end());
    if (sample_shape != model.input_shape) {
        throw Error("batch sample shape " + shape_str(sample_shape) +
                    " does not match model input shape " + shape_str(model.input_shape));
    }
    std::vector<Tensor> outputs(model.node_count());
    for (std::size_t v = 0; v < model.node_count(); ++v) {
        const auto& node = model.nodes[v];
        if (model.preds[v].empty()) {
            outputs[v] = node_forward(node, batch, nullptr);
        } else if (node.kind == LayerKind::Add) {
            outputs[v] = node_forward(node, outputs[model.preds[v][0]],
                                      &outputs[model.preds[v][1]]);
        } else {
            outputs[v] = node_forward(node, outputs[model.preds[v][0]], nullptr);
        }
    }
    return outputs;
}

}  // namespace

Tensor forward(const ModelGraph& model, const Tensor& batch) {
    auto outputs = run_forward(model, batch);
    return outputs[model.output_node];
}

double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor* grad) {
    const std::size_t n = logits.dim(0);
    const std::size_t classes = logits.dim(1);
    if (labels.size() != n) throw Error("labels length does not match batch size");
    if (grad) *grad = Tensor({n, classes});
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw Error("label " + std::to_string(label) + " out of range [0, " +
                        std::to_string(classes) + ")");
        }
        const double* z = logits.data() + i * classes;
        double zmax = z[0];
        for (std::size_t c = 1; c < classes; ++c) zmax = std::max(zmax, z[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(z[c] - zmax);
        const double log_z = zmax + std::log(sum);
        total += log_z - z[label];
        if (grad) {
            double* g = grad->data() + i * classes;
            for (std::size_t c = 0; c < classes; ++c) {
                g[c] = std::exp(z[c] - log_z) / static_cast<double>(n);
            }
            g[label] -= 1.0 / static_cast<double>(n);
        }
    }
    return total / static_cast<double>(n);
}

std::pair<double, ParamGrads> loss_and_grad(const ModelGraph& model, const Tensor& batch,
                                            std::span<const int> labels) {
    auto outputs = run_forward(model, batch);
    for (std::size_t v = 0; v < outputs.size(); ++v) {
        for (double a : outputs[v].values()) {
            if (!std::isfinite(a)) {
                throw NumericError("non-finite activation at layer " + std::to_string(v) + " ('" +
                                   model.nodes[v].name + "')");
            }
        }
    }

    Tensor dlogits;
    double loss = softmax_cross_entropy(outputs[model.output_node], labels, &dlogits);

    ParamGrads grads;
    grads.weights.resize(model.node_count());
    grads.bias.resize(model.node_count());

    // output-gradient buffers; nodes with several successors accumulate
    std::vector<Tensor> grad_out(model.node_count());
    grad_out[model.output_node] = std::move(dlogits);

    auto accumulate = [](Tensor& dst, const Tensor& src) {
        if (dst.empty()) {
            dst = src;
        } else {
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
    };

    for (std::size_t vi = model.node_count(); vi-- > 0;) {
        const auto& node = model.nodes[vi];
        Tensor& gy = grad_out[vi];
        if (gy.empty()) continue;  // node does not reach the output
        const Tensor& x = model.preds[vi].empty() ? batch : outputs[model.preds[vi][0]];
        switch (node.kind) {
            case LayerKind::Dense: {
                Tensor gx, gw, gb;
                dense_backward(x, *node.weights, gy, gx, gw, node.bias ? &gb : nullptr);
                grads.weights[vi] = std::move(gw);
                if (node.bias) grads.bias[vi] = std::move(gb);
                if (!model.preds[vi].empty()) accumulate(grad_out[model.preds[vi][0]], gx);
                break;
            }
            case LayerKind::Conv2d: {
                Tensor gx, gw, gb;
                conv2d_backward(x, *node.weights, node.conv, gy, gx, gw,
                                node.bias ? &gb : nullptr);
                grads.weights[vi] = std::move(gw);
                if (node.bias) grads.bias[vi] = std::move(gb);
                if (!model.preds[vi].empty()) accumulate(grad_out[model.preds[vi][0]], gx);
                break;
            }
            case LayerKind::ReLU: {
                Tensor gx;
                relu_backward(x, gy, gx);
                if (!model.preds[vi].empty()) accumulate(grad_out[model.preds[vi][0]], gx);
                break;
            }
            case LayerKind::Flatten: {
                if (!model.preds[vi].empty()) {
                    accumulate(grad_out[model.preds[vi][0]], gy.reshaped(x.shape()));
                }
                break;
            }
            case LayerKind::Add: {
                accumulate(grad_out[model.preds[vi][0]], gy);
                accumulate(grad_out[model.preds[vi][1]], gy);
                break;
            }
        }
        gy = Tensor();  // free
    }
    return {loss, std::move(grads)};
}

ParamLayout param_layout(const ModelGraph& model) {
    ParamLayout layout;
    for (std::size_t v = 0; v < model.node_count(); ++v) {
        const auto& node = model.nodes[v];
        if (!node.weights) continue;
        ParamLayout::Chunk c;
        c.node = v;
        c.weight_offset = layout.total;
        c.weight_count = node.weights->size();
        layout.total += c.weight_count;
        c.bias_offset = layout.total;
        c.bias_count = node.bias ? node.bias->size() : 0;
        layout.total += c.bias_count;
        layout.chunks.push_back(c);
    }
    return layout;
}

std::vector<double> flatten_params(const ModelGraph& model) {
    std::vector<double> flat;
    flat.reserve(model.param_count());
    for (const auto& node : model.nodes) {
        if (node.weights) {
            flat.insert(flat.end(), node.weights->values().begin(), node.weights->values().end());
        }
        if (node.bias) {
            flat.insert(flat.end(), node.bias->values().begin(), node.bias->values().end());
        }
    }
    return flat;
}

void set_params(ModelGraph& model, std::span<const double> flat) {
    std::size_t pos = 0;
    for (auto& node : model.nodes) {
        if (node.weights) {
            if (pos + node.weights->size() > flat.size()) throw Error("flat params too short");
            std::copy(flat.begin() + pos, flat.begin() + pos + node.weights->size(),
                      node.weights->values().begin());
            pos += node.weights->size();
        }
        if (node.bias) {
            if (pos + node.bias->size() > flat.size()) throw Error("flat params too short");
            std::copy(flat.begin() + pos, flat.begin() + pos + node.bias->size(),
                      node.bias->values().begin());
            pos += node.bias->size();
        }
    }
    if (pos != flat.size()) throw Error("flat params length mismatch");
}

std::vector<double> flatten_grads(const ModelGraph& model, const ParamGrads& grads) {
    std::vector<double> flat;
    flat.reserve(model.param_count());
    for (std::size_t v = 0; v < model.node_count(); ++v) {
        const auto& node = model.nodes[v];
        if (node.weights) {
            const Tensor& g = grads.weights[v];
            if (g.empty()) {
                flat.insert(flat.end(), node.weights->size(), 0.0);
            } else {
                flat.insert(flat.end(), g.values().begin(), g.values().end());
            }
        }
        if (node.bias) {
            const Tensor& g = grads.bias[v];
            if (g.empty()) {
                flat.insert(flat.end(), node.bias->size(), 0.0);
            } else {
                flat.insert(flat.end(), g.values().begin(), g.values().end());
            }
        }
    }
    return flat;
}

}  // namespace taper
