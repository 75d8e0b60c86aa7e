#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "taper/tensor.hpp"

namespace taper {

enum class LayerKind { Dense, Conv2d, ReLU, Flatten, Add };

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

struct ConvMeta {
    std::size_t kernel_h = 1;
    std::size_t kernel_w = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
};

/// One node of a model graph. Shapes are per-sample (no batch dimension).
/// Dense weights are [out_features, in_features]; Conv2d weights are
/// [out_channels, in_channels, kh, kw]. Bias is optional for both.
struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    std::string name;
    std::vector<std::size_t> in_shape;
    std::vector<std::size_t> out_shape;
    std::optional<Tensor> weights;
    std::optional<Tensor> bias;
    ConvMeta conv;

    bool has_params() const { return weights.has_value(); }
};

/// Ordered DAG of layer nodes. Node order is execution (topological) order
/// after trace_graph. A node with no predecessors reads the graph input;
/// exactly one such node may exist (single source). The output node must
/// have no successors (single sink).
struct ModelGraph {
    std::vector<LayerSpec> nodes;
    std::vector<std::vector<std::size_t>> preds;  // predecessor ids per node
    std::vector<std::size_t> input_shape;         // per-sample
    std::size_t output_node = 0;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t edge_count() const;
    std::vector<std::vector<std::size_t>> successors() const;
    std::size_t param_count() const;

    const LayerSpec* find_node(const std::string& name) const;
};

// --- construction helpers ---

LayerSpec dense_layer(std::string name, std::size_t in_features, std::size_t out_features,
                      bool with_bias = true);
LayerSpec conv2d_layer(std::string name, std::size_t in_channels, std::size_t out_channels,
                       std::size_t kernel_h, std::size_t kernel_w, std::size_t stride = 1,
                       std::size_t padding = 0, bool with_bias = true);
LayerSpec relu_layer(std::string name);
LayerSpec flatten_layer(std::string name);
LayerSpec add_layer(std::string name);

/// Sequential graph: each node's predecessor is the previous node.
ModelGraph chain_graph(std::vector<std::size_t> input_shape, std::vector<LayerSpec> layers);

/// Output shape as a deterministic function of kind, input shape, and meta.
std::vector<std::size_t> infer_out_shape(const LayerSpec& node,
                                         const std::vector<std::size_t>& in_shape);

/// Structural validation: single source and sink, acyclic, shape agreement,
/// parameter shapes consistent with declared in/out shapes.
void validate_graph(const ModelGraph& graph);

/// Runs a probe forward pass, reorders nodes topologically, and records the
/// per-node in/out shapes. Throws if any layer rejects its input shape.
ModelGraph trace_graph(const ModelGraph& graph);

}  // namespace taper
