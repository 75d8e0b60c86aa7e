#pragma once

#include <span>
#include <utility>
#include <vector>

#include "taper/graph.hpp"
#include "taper/tensor.hpp"

namespace taper {

/// Deterministic forward pass. Returns logits [batch, num_classes].
Tensor forward(const ModelGraph& model, const Tensor& batch);

/// Per-node gradients, index-aligned with graph nodes. Parameterless nodes
/// carry empty tensors.
struct ParamGrads {
    std::vector<Tensor> weights;
    std::vector<Tensor> bias;
};

/// Mean softmax cross-entropy over the batch (log-sum-exp stabilized).
/// When grad is non-null it receives dLoss/dLogits.
double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor* grad);

/// Loss plus gradients for every trainable parameter, via backprop.
std::pair<double, ParamGrads> loss_and_grad(const ModelGraph& model, const Tensor& batch,
                                            std::span<const int> labels);

// --- flat parameter views (node order, weights before bias per node) ---

std::vector<double> flatten_params(const ModelGraph& model);
void set_params(ModelGraph& model, std::span<const double> flat);
std::vector<double> flatten_grads(const ModelGraph& model, const ParamGrads& grads);

/// Global index ranges per node within the flat vector.
struct ParamLayout {
    struct Chunk {
        std::size_t node;
        std::size_t weight_offset, weight_count;
        std::size_t bias_offset, bias_count;  // count 0 when absent
    };
    std::vector<Chunk> chunks;
    std::size_t total = 0;
};
ParamLayout param_layout(const ModelGraph& model);

}  // namespace taper
