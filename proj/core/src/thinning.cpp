#include "taper/thinning.hpp"

#include <algorithm>
#include <numeric>

#include "taper/error.hpp"

namespace taper {

namespace {

bool is_structural(const LayerSpec& node) {
    return node.kind == LayerKind::Dense || node.kind == LayerKind::Conv2d;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

std::vector<std::size_t> union_sorted(const std::vector<std::size_t>& a,
                                      const std::vector<std::size_t>& b) {
    std::vector<std::size_t> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

void check_keep_set(const std::vector<std::size_t>& keep, std::size_t bound,
                    const std::string& name) {
    if (keep.empty()) throw Error("degenerate layer '" + name + "': no structures retained");
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i] >= bound) throw Error("retained index out of bounds for layer '" + name + "'");
        if (i > 0 && keep[i] <= keep[i - 1]) {
            throw Error("retained set must be strictly increasing for layer '" + name + "'");
        }
    }
}

}  // namespace

bool ThinningPlan::is_identity(const ModelGraph& graph) const {
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        const auto& node = graph.nodes[v];
        if (!is_structural(node)) continue;
        if (out_keep[v].size() != node.weights->dim(0)) return false;
        if (node.kind == LayerKind::Dense && in_keep[v].size() != node.weights->dim(1)) {
            return false;
        }
        if (node.kind == LayerKind::Conv2d && in_keep[v].size() != node.weights->dim(1)) {
            return false;
        }
    }
    return true;
}

ThinningPlan plan_thinning(const ModelGraph& graph, const StructureMasks& masks) {
    const std::size_t n = graph.node_count();

    // Producer of a node's channel axis: the structural or Add node that
    // defines it. Zero-pred nodes are produced by the graph input (NONE).
    constexpr std::size_t NONE = static_cast<std::size_t>(-1);
    std::vector<std::size_t> producer(n, NONE);
    for (std::size_t v = 0; v < n; ++v) {
        const auto& node = graph.nodes[v];
        if (is_structural(node) || node.kind == LayerKind::Add) {
            producer[v] = v;
        } else if (!graph.preds[v].empty()) {
            producer[v] = producer[graph.preds[v][0]];
        }
    }

    // Initial retained sets from the masks; absent masks keep everything.
    std::vector<std::vector<std::size_t>> keep(n);
    const std::size_t sink_producer = producer[graph.output_node];
    for (std::size_t v = 0; v < n; ++v) {
        const auto& node = graph.nodes[v];
        if (!is_structural(node)) continue;
        const std::size_t structures = node.weights->dim(0);
        auto it = masks.keep.find(v);
        if (it == masks.keep.end() || v == sink_producer) {
            // the class dimension is part of the task contract
            keep[v] = all_indices(structures);
            continue;
        }
        if (it->second.size() != structures) {
            throw Error("mask size mismatch for layer '" + node.name + "'");
        }
        for (std::size_t i = 0; i < structures; ++i) {
            if (it->second[i]) keep[v].push_back(i);
        }
        if (keep[v].empty()) throw Error("degenerate layer '" + node.name + "'");
    }

    // Fixpoint: each Add forces the union of both branch channel sets onto
    // both producers (missing channels stay as physical zero structures).
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t v = 0; v < n; ++v) {
            if (graph.nodes[v].kind != LayerKind::Add) continue;
            std::vector<std::size_t> merged;
            bool any_input_branch = false;
            for (std::size_t u : graph.preds[v]) {
                const std::size_t p = producer[u];
                if (p == NONE) {
                    any_input_branch = true;
                } else {
                    merged = union_sorted(merged, keep[p]);
                }
            }
            if (any_input_branch) {
                merged = all_indices(graph.nodes[v].in_shape[0]);
            }
            if (merged != keep[v]) {
                keep[v] = merged;
                changed = true;
            }
            for (std::size_t u : graph.preds[v]) {
                const std::size_t p = producer[u];
                if (p != NONE && graph.nodes[p].kind != LayerKind::Add && keep[p] != merged) {
                    keep[p] = merged;
                    changed = true;
                }
            }
        }
    }

    // prop_out: retained output-index set per node, with Flatten expansion.
    std::vector<std::vector<std::size_t>> prop_out(n);
    for (std::size_t v = 0; v < n; ++v) {
        const auto& node = graph.nodes[v];
        switch (node.kind) {
            case LayerKind::Dense:
            case LayerKind::Conv2d:
            case LayerKind::Add:
                prop_out[v] = keep[v].empty() && node.kind == LayerKind::Add
                                  ? all_indices(node.out_shape[0])
                                  : keep[v];
                break;
            case LayerKind::ReLU:
                prop_out[v] = graph.preds[v].empty()
                                  ? all_indices(node.out_shape[0])
                                  : prop_out[graph.preds[v][0]];
                break;
            case LayerKind::Flatten: {
                std::vector<std::size_t> source =
                    graph.preds[v].empty() ? all_indices(node.in_shape[0])
                                           : prop_out[graph.preds[v][0]];
                // each retained channel contributes a contiguous run of
                // h*w flattened inputs
                std::size_t span = 1;
                for (std::size_t d = 1; d < node.in_shape.size(); ++d) span *= node.in_shape[d];
                for (std::size_t c : source) {
                    for (std::size_t k = 0; k < span; ++k) prop_out[v].push_back(c * span + k);
                }
                break;
            }
        }
    }

    ThinningPlan plan;
    plan.out_keep.resize(n);
    plan.in_keep.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        const auto& node = graph.nodes[v];
        plan.out_keep[v] = prop_out[v];
        if (graph.preds[v].empty()) {
            std::size_t in_axis = node.in_shape[0];
            if (node.kind == LayerKind::Dense && node.weights) in_axis = node.weights->dim(1);
            plan.in_keep[v] = all_indices(in_axis);
        } else {
            plan.in_keep[v] = prop_out[graph.preds[v][0]];
        }
        if (is_structural(node)) {
            check_keep_set(plan.out_keep[v], node.weights->dim(0), node.name);
            check_keep_set(plan.in_keep[v], node.weights->dim(1), node.name);
        }
    }
    return plan;
}

ModelGraph apply_thinning(const ModelGraph& graph, const ThinningPlan& plan) {
    if (plan.out_keep.size() != graph.node_count()) {
        throw Error("thinning plan does not match graph");
    }
    ModelGraph thinned = graph;
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        auto& node = thinned.nodes[v];
        if (!is_structural(node)) continue;
        const auto& rows = plan.out_keep[v];
        const auto& cols = plan.in_keep[v];
        const Tensor& w = *graph.nodes[v].weights;
        if (node.kind == LayerKind::Dense) {
            Tensor nw({rows.size(), cols.size()});
            for (std::size_t r = 0; r < rows.size(); ++r) {
                for (std::size_t c = 0; c < cols.size(); ++c) {
                    nw[r * cols.size() + c] = w[rows[r] * w.dim(1) + cols[c]];
                }
            }
            node.weights = std::move(nw);
        } else {
            const std::size_t kh = w.dim(2), kw = w.dim(3);
            Tensor nw({rows.size(), cols.size(), kh, kw});
            for (std::size_t r = 0; r < rows.size(); ++r) {
                for (std::size_t c = 0; c < cols.size(); ++c) {
                    for (std::size_t k = 0; k < kh * kw; ++k) {
                        nw[(r * cols.size() + c) * kh * kw + k] =
                            w[(rows[r] * w.dim(1) + cols[c]) * kh * kw + k];
                    }
                }
            }
            node.weights = std::move(nw);
        }
        if (node.bias) {
            Tensor nb({rows.size()});
            for (std::size_t r = 0; r < rows.size(); ++r) nb[r] = (*graph.nodes[v].bias)[rows[r]];
            node.bias = std::move(nb);
        }
    }
    return trace_graph(thinned);
}

ModelGraph thin_model(const ModelGraph& graph, const StructureMasks& masks) {
    // Masked-but-retained structures (union rule, protected output layers)
    // must stay zero in the thinned network, so slice the masked model.
    return apply_thinning(apply_structure_masks(graph, masks), plan_thinning(graph, masks));
}

ModelGraph apply_structure_masks(const ModelGraph& graph, const StructureMasks& masks) {
    ModelGraph masked = graph;
    for (const auto& [v, flags] : masks.keep) {
        if (v >= masked.node_count()) throw Error("mask references unknown node");
        auto& node = masked.nodes[v];
        if (!node.weights) throw Error("mask on parameterless layer '" + node.name + "'");
        const std::size_t structures = node.weights->dim(0);
        if (flags.size() != structures) {
            throw Error("mask size mismatch for layer '" + node.name + "'");
        }
        const std::size_t span = node.weights->size() / structures;
        for (std::size_t s = 0; s < structures; ++s) {
            if (flags[s]) continue;
            for (std::size_t k = 0; k < span; ++k) (*node.weights)[s * span + k] = 0.0;
            if (node.bias) (*node.bias)[s] = 0.0;
        }
    }
    return masked;
}

}  // namespace taper
