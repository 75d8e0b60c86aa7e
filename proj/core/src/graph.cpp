#include "taper/graph.hpp"

#include <algorithm>

#include "taper/error.hpp"
#include "taper/net.hpp"

namespace taper {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::ReLU: return "relu";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Add: return "add";
    }
    return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
    if (name == "dense") return LayerKind::Dense;
    if (name == "conv2d") return LayerKind::Conv2d;
    if (name == "relu") return LayerKind::ReLU;
    if (name == "flatten") return LayerKind::Flatten;
    if (name == "add") return LayerKind::Add;
    throw Error("unknown layer kind '" + name + "'");
}

std::size_t ModelGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto& p : preds) n += p.size();
    return n;
}

std::vector<std::vector<std::size_t>> ModelGraph::successors() const {
    std::vector<std::vector<std::size_t>> succ(nodes.size());
    for (std::size_t v = 0; v < preds.size(); ++v) {
        for (std::size_t u : preds[v]) succ[u].push_back(v);
    }
    return succ;
}

std::size_t ModelGraph::param_count() const {
    std::size_t n = 0;
    for (const auto& node : nodes) {
        if (node.weights) n += node.weights->size();
        if (node.bias) n += node.bias->size();
    }
    return n;
}

const LayerSpec* ModelGraph::find_node(const std::string& name) const {
    for (const auto& node : nodes) {
        if (node.name == name) return &node;
    }
    return nullptr;
}

LayerSpec dense_layer(std::string name, std::size_t in_features, std::size_t out_features,
                      bool with_bias) {
    LayerSpec node;
    node.kind = LayerKind::Dense;
    node.name = std::move(name);
    node.weights = Tensor({out_features, in_features});
    if (with_bias) node.bias = Tensor({out_features});
    return node;
}

LayerSpec conv2d_layer(std::string name, std::size_t in_channels, std::size_t out_channels,
                       std::size_t kernel_h, std::size_t kernel_w, std::size_t stride,
                       std::size_t padding, bool with_bias) {
    LayerSpec node;
    node.kind = LayerKind::Conv2d;
    node.name = std::move(name);
    node.conv = ConvMeta{kernel_h, kernel_w, stride, padding};
    node.weights = Tensor({out_channels, in_channels, kernel_h, kernel_w});
    if (with_bias) node.bias = Tensor({out_channels});
    return node;
}

LayerSpec relu_layer(std::string name) {
    LayerSpec node;
    node.kind = LayerKind::ReLU;
    node.name = std::move(name);
    return node;
}

LayerSpec flatten_layer(std::string name) {
    LayerSpec node;
    node.kind = LayerKind::Flatten;
    node.name = std::move(name);
    return node;
}

LayerSpec add_layer(std::string name) {
    LayerSpec node;
    node.kind = LayerKind::Add;
    node.name = std::move(name);
    return node;
}

ModelGraph chain_graph(std::vector<std::size_t> input_shape, std::vector<LayerSpec> layers) {
    if (layers.empty()) throw Error("chain_graph requires at least one layer");
    ModelGraph g;
    g.input_shape = std::move(input_shape);
    g.nodes = std::move(layers);
    g.preds.resize(g.nodes.size());
    for (std::size_t i = 1; i < g.nodes.size(); ++i) g.preds[i] = {i - 1};
    g.output_node = g.nodes.size() - 1;
    return trace_graph(g);
}

std::vector<std::size_t> infer_out_shape(const LayerSpec& node,
                                         const std::vector<std::size_t>& in_shape) {
    switch (node.kind) {
        case LayerKind::Dense: {
            if (in_shape.size() != 1) {
                throw Error("layer '" + node.name + "': dense expects a 1-D input, got " +
                            shape_str(in_shape));
            }
            if (!node.weights || node.weights->rank() != 2) {
                throw Error("layer '" + node.name + "': dense weights must be 2-D");
            }
            if (node.weights->dim(1) != in_shape[0]) {
                throw Error("layer '" + node.name + "': dense expects " +
                            std::to_string(node.weights->dim(1)) + " input features, got " +
                            std::to_string(in_shape[0]));
            }
            return {node.weights->dim(0)};
        }
        case LayerKind::Conv2d: {
            if (in_shape.size() != 3) {
                throw Error("layer '" + node.name + "': conv2d expects a [c,h,w] input, got " +
                            shape_str(in_shape));
            }
            if (!node.weights || node.weights->rank() != 4) {
                throw Error("layer '" + node.name + "': conv2d weights must be 4-D");
            }
            if (node.weights->dim(1) != in_shape[0]) {
                throw Error("layer '" + node.name + "': conv2d expects " +
                            std::to_string(node.weights->dim(1)) + " input channels, got " +
                            std::to_string(in_shape[0]));
            }
            const ConvMeta& m = node.conv;
            std::size_t h = in_shape[1] + 2 * m.padding;
            std::size_t w = in_shape[2] + 2 * m.padding;
            if (h < m.kernel_h || w < m.kernel_w) {
                throw Error("layer '" + node.name + "': kernel larger than padded input");
            }
            std::size_t h_out = (h - m.kernel_h) / m.stride + 1;
            std::size_t w_out = (w - m.kernel_w) / m.stride + 1;
            return {node.weights->dim(0), h_out, w_out};
        }
        case LayerKind::ReLU:
        case LayerKind::Add:
            return in_shape;
        case LayerKind::Flatten:
            return {shape_size(in_shape)};
    }
    throw Error("unreachable layer kind");
}

namespace {

void check_param_shapes(const LayerSpec& node) {
    if (node.kind == LayerKind::Dense) {
        if (node.bias && (node.bias->rank() != 1 || node.bias->dim(0) != node.weights->dim(0))) {
            throw Error("layer '" + node.name + "': dense bias shape must be [out_features]");
        }
    } else if (node.kind == LayerKind::Conv2d) {
        if (node.bias && (node.bias->rank() != 1 || node.bias->dim(0) != node.weights->dim(0))) {
            throw Error("layer '" + node.name + "': conv2d bias shape must be [out_channels]");
        }
    } else if (node.weights || node.bias) {
        throw Error("layer '" + node.name + "': " + layer_kind_name(node.kind) +
                    " carries no parameters");
    }
}

std::vector<std::size_t> topological_order(const ModelGraph& g) {
    const std::size_t n = g.node_count();
    std::vector<std::size_t> indegree(n, 0);
    for (std::size_t v = 0; v < n; ++v) indegree[v] = g.preds[v].size();
    auto succ = g.successors();
    // Kahn's algorithm; the ready set is kept sorted for a stable order.
    std::vector<std::size_t> ready;
    for (std::size_t v = 0; v < n; ++v) {
        if (indegree[v] == 0) ready.push_back(v);
    }
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        std::size_t u = ready.front();
        ready.erase(ready.begin());
        order.push_back(u);
        for (std::size_t v : succ[u]) {
            if (--indegree[v] == 0) {
                ready.insert(std::lower_bound(ready.begin(), ready.end(), v), v);
            }
        }
    }
    if (order.size() != n) throw Error("graph contains a cycle");
    return order;
}

}  // namespace

void validate_graph(const ModelGraph& graph) {
    const std::size_t n = graph.node_count();
    if (n == 0) throw Error("graph has no nodes");
    if (graph.preds.size() != n) throw Error("graph preds list size mismatch");
    if (graph.output_node >= n) throw Error("graph output node out of range");
    if (graph.input_shape.empty()) throw Error("graph input shape missing");

    std::size_t sources = 0;
    for (std::size_t v = 0; v < n; ++v) {
        const auto& node = graph.nodes[v];
        if (graph.preds[v].empty()) ++sources;
        for (std::size_t u : graph.preds[v]) {
            if (u >= n) throw Error("edge references unknown node");
        }
        std::size_t want = node.kind == LayerKind::Add ? 2 : 1;
        if (!graph.preds[v].empty() && graph.preds[v].size() != want) {
            throw Error("layer '" + node.name + "': expected " + std::to_string(want) +
                        " predecessors, got " + std::to_string(graph.preds[v].size()));
        }
        if (node.kind == LayerKind::Add && graph.preds[v].size() != 2) {
            throw Error("layer '" + node.name + "': add requires two predecessors");
        }
        if (node.has_params()) check_param_shapes(node);
    }
    if (sources != 1) {
        throw Error("graph must have exactly one source node, found " + std::to_string(sources));
    }
    auto succ = graph.successors();
    std::size_t sinks = 0;
    for (std::size_t v = 0; v < n; ++v) {
        if (succ[v].empty()) {
            ++sinks;
            if (v != graph.output_node) {
                throw Error("layer '" + graph.nodes[v].name + "' is a dead end");
            }
        }
    }
    if (sinks != 1) throw Error("graph must have exactly one sink node");
    topological_order(graph);  // throws on cycles

    // duplicate names break serialization round-trips
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!graph.nodes[i].name.empty() && graph.nodes[i].name == graph.nodes[j].name) {
                throw Error("duplicate layer name '" + graph.nodes[i].name + "'");
            }
        }
    }
}

ModelGraph trace_graph(const ModelGraph& graph) {
    validate_graph(graph);
    auto order = topological_order(graph);

    ModelGraph traced;
    traced.input_shape = graph.input_shape;
    traced.nodes.reserve(graph.node_count());
    traced.preds.resize(graph.node_count());
    std::vector<std::size_t> new_id(graph.node_count());
    for (std::size_t pos = 0; pos < order.size(); ++pos) new_id[order[pos]] = pos;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        traced.nodes.push_back(graph.nodes[order[pos]]);
        auto& p = traced.preds[pos];
        for (std::size_t u : graph.preds[order[pos]]) p.push_back(new_id[u]);
        std::sort(p.begin(), p.end());
    }
    traced.output_node = new_id[graph.output_node];

    // Record shapes by walking the order; infer_out_shape throws on mismatch.
    for (std::size_t v = 0; v < traced.node_count(); ++v) {
        auto& node = traced.nodes[v];
        std::vector<std::size_t> in_shape;
        if (traced.preds[v].empty()) {
            in_shape = traced.input_shape;
        } else if (node.kind == LayerKind::Add) {
            const auto& a = traced.nodes[traced.preds[v][0]].out_shape;
            const auto& b = traced.nodes[traced.preds[v][1]].out_shape;
            if (a != b) {
                throw Error("layer '" + node.name + "': add inputs disagree, " + shape_str(a) +
                            " vs " + shape_str(b));
            }
            in_shape = a;
        } else {
            in_shape = traced.nodes[traced.preds[v][0]].out_shape;
        }
        node.in_shape = in_shape;
        node.out_shape = infer_out_shape(node, in_shape);
    }

    // Probe forward on a single zero sample confirms the executable path.
    std::vector<std::size_t> probe_shape = {1};
    probe_shape.insert(probe_shape.end(), traced.input_shape.begin(), traced.input_shape.end());
    forward(traced, Tensor::zeros(probe_shape));
    return traced;
}

}  // namespace taper
