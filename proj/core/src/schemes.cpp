#include "taper/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "taper/error.hpp"
#include "taper/half.hpp"
#include "taper/net.hpp"

namespace taper {

const char* criteria_name(Criteria c) {
    switch (c) {
        case Criteria::L2Norm: return "l2_norm";
        case Criteria::MeanAbs: return "mean_abs";
        case Criteria::MaxAbs: return "max_abs";
    }
    return "?";
}

Criteria criteria_from_name(const std::string& name) {
    if (name == "l2_norm") return Criteria::L2Norm;
    if (name == "mean_abs") return Criteria::MeanAbs;
    if (name == "max_abs") return Criteria::MaxAbs;
    throw Error("unknown criteria '" + name + "'");
}

const char* scheme_kind_name(Scheme::Kind kind) {
    switch (kind) {
        case Scheme::Kind::Prune: return "prune";
        case Scheme::Kind::Quantize: return "quantize";
        case Scheme::Kind::NeuronPrune: return "neuron_prune";
        case Scheme::Kind::FilterPrune: return "filter_prune";
        case Scheme::Kind::BlockPrune: return "block_prune";
        case Scheme::Kind::Compose: return "compose";
    }
    return "?";
}

Scheme Scheme::prune() {
    Scheme s;
    s.kind = Kind::Prune;
    return s;
}

Scheme Scheme::quantize() {
    Scheme s;
    s.kind = Kind::Quantize;
    return s;
}

Scheme Scheme::neuron_prune(Criteria criteria) {
    Scheme s;
    s.kind = Kind::NeuronPrune;
    s.criteria = criteria;
    return s;
}

Scheme Scheme::filter_prune(Criteria criteria) {
    Scheme s;
    s.kind = Kind::FilterPrune;
    s.criteria = criteria;
    return s;
}

Scheme Scheme::block_prune(Criteria criteria, std::vector<std::size_t> block_shape) {
    if (block_shape.empty() || block_shape.size() > 2) {
        throw Error("block_prune block shape must have 1 or 2 dimensions");
    }
    for (std::size_t d : block_shape) {
        if (d == 0) throw Error("block_prune block dimensions must be >= 1");
    }
    Scheme s;
    s.kind = Kind::BlockPrune;
    s.criteria = criteria;
    s.block_shape = std::move(block_shape);
    if (s.block_shape.size() == 1) s.block_shape.push_back(1);
    return s;
}

Scheme Scheme::compose(std::vector<Scheme> schemes) {
    if (schemes.empty()) throw Error("compose requires at least one scheme");
    Scheme s;
    s.kind = Kind::Compose;
    for (auto& child : schemes) {
        if (child.kind == Kind::Compose) {
            for (auto& grand : child.children) s.children.push_back(std::move(grand));
        } else {
            s.children.push_back(std::move(child));
        }
    }
    return s;
}

bool Scheme::is_structured() const {
    if (kind == Kind::NeuronPrune || kind == Kind::FilterPrune || kind == Kind::BlockPrune) {
        return true;
    }
    if (kind == Kind::Compose) {
        return std::any_of(children.begin(), children.end(),
                           [](const Scheme& c) { return c.is_structured(); });
    }
    return false;
}

bool Scheme::prunes() const {
    if (kind == Kind::Quantize) return false;
    if (kind == Kind::Compose) {
        return std::any_of(children.begin(), children.end(),
                           [](const Scheme& c) { return c.prunes(); });
    }
    return true;
}

bool Scheme::quantizes() const {
    if (kind == Kind::Quantize) return true;
    if (kind == Kind::Compose) {
        return std::any_of(children.begin(), children.end(),
                           [](const Scheme& c) { return c.quantizes(); });
    }
    return false;
}

bool Scheme::applies_to(const LayerSpec& node) const {
    if (!node.weights) return false;
    if (!layer_filter.empty() &&
        std::find(layer_filter.begin(), layer_filter.end(), node.name) == layer_filter.end()) {
        return false;
    }
    switch (kind) {
        case Kind::Prune:
        case Kind::Quantize:
            return node.kind == LayerKind::Dense || node.kind == LayerKind::Conv2d;
        case Kind::NeuronPrune:
        case Kind::BlockPrune:
            return node.kind == LayerKind::Dense;
        case Kind::FilterPrune:
            return node.kind == LayerKind::Conv2d;
        case Kind::Compose:
            return std::any_of(children.begin(), children.end(),
                               [&](const Scheme& c) { return c.applies_to(node); });
    }
    return false;
}

std::string Scheme::describe() const {
    if (kind != Kind::Compose) return scheme_kind_name(kind);
    std::string out = "compose(";
    for (std::size_t i = 0; i < children.size(); ++i) {
        if (i) out += ", ";
        out += children[i].describe();
    }
    return out + ")";
}

namespace {

// Number of entries to zero for sparsity s over `total` units. The small
// epsilon absorbs representation error in s * total (0.99 * 1000 must floor
// to 990, not 989).
std::size_t zero_count(double sparsity, std::size_t total) {
    if (!(sparsity >= 0.0) || sparsity >= 1.0) {
        throw Error("sparsity must lie in [0, 1), got " + std::to_string(sparsity));
    }
    double scaled = sparsity * static_cast<double>(total) + 1e-9;
    return static_cast<std::size_t>(std::floor(scaled));
}

struct Working {
    bool present = false;
    bool quantized = false;
    std::vector<double> weights;
    std::vector<std::uint8_t> mask;  // per weight entry, 1 = retained
    std::vector<double> bias;
    bool has_bias = false;
};

double score_entries(Criteria criteria, std::span<const double> values) {
    if (values.empty()) return 0.0;
    switch (criteria) {
        case Criteria::L2Norm: {
            double acc = 0.0;
            for (double v : values) acc += v * v;
            return std::sqrt(acc);
        }
        case Criteria::MeanAbs: {
            double acc = 0.0;
            for (double v : values) acc += std::fabs(v);
            return acc / static_cast<double>(values.size());
        }
        case Criteria::MaxAbs: {
            double acc = 0.0;
            for (double v : values) acc = std::max(acc, std::fabs(v));
            return acc;
        }
    }
    return 0.0;
}

// A structure is a set of weight-entry indices within one node: a Dense row,
// a Conv2d filter, or a (possibly ragged) block of a Dense weight matrix.
struct Structure {
    std::size_t node;
    std::size_t index;  // within the node, for deterministic tie-breaks
    std::vector<std::size_t> entries;
};

std::vector<Structure> enumerate_structures(const ModelGraph& graph, const Scheme& op,
                                            const std::vector<std::size_t>& nodes) {
    std::vector<Structure> structures;
    for (std::size_t v : nodes) {
        const auto& node = graph.nodes[v];
        const auto& w = *node.weights;
        if (op.kind == Scheme::Kind::NeuronPrune) {
            const std::size_t rows = w.dim(0), cols = w.dim(1);
            for (std::size_t r = 0; r < rows; ++r) {
                Structure s{v, r, {}};
                s.entries.resize(cols);
                std::iota(s.entries.begin(), s.entries.end(), r * cols);
                structures.push_back(std::move(s));
            }
        } else if (op.kind == Scheme::Kind::FilterPrune) {
            const std::size_t filters = w.dim(0);
            const std::size_t span = w.size() / filters;
            for (std::size_t f = 0; f < filters; ++f) {
                Structure s{v, f, {}};
                s.entries.resize(span);
                std::iota(s.entries.begin(), s.entries.end(), f * span);
                structures.push_back(std::move(s));
            }
        } else {  // BlockPrune over a Dense [rows, cols] matrix
            const std::size_t rows = w.dim(0), cols = w.dim(1);
            const std::size_t bh = op.block_shape[0], bw = op.block_shape[1];
            const std::size_t grid_r = (rows + bh - 1) / bh;
            const std::size_t grid_c = (cols + bw - 1) / bw;
            std::size_t index = 0;
            for (std::size_t gr = 0; gr < grid_r; ++gr) {
                for (std::size_t gc = 0; gc < grid_c; ++gc, ++index) {
                    Structure s{v, index, {}};
                    for (std::size_t r = gr * bh; r < std::min((gr + 1) * bh, rows); ++r) {
                        for (std::size_t c = gc * bw; c < std::min((gc + 1) * bw, cols); ++c) {
                            s.entries.push_back(r * cols + c);
                        }
                    }
                    structures.push_back(std::move(s));
                }
            }
        }
    }
    return structures;
}

std::vector<std::size_t> applicable_nodes(const ModelGraph& graph, const Scheme& op) {
    std::vector<std::size_t> nodes;
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        if (op.applies_to(graph.nodes[v])) nodes.push_back(v);
    }
    return nodes;
}

void apply_unstructured_prune(const ModelGraph& graph, const Scheme& op, double sparsity,
                              std::vector<Working>& work) {
    auto nodes = applicable_nodes(graph, op);
    if (nodes.empty()) throw Error("prune: no applicable layers in model");

    // global (node, entry) order defines the deterministic tie-break index
    struct Ref {
        double magnitude;
        std::size_t node, entry;
    };
    std::vector<Ref> refs;
    for (std::size_t v : nodes) {
        const auto& w = work[v].weights;
        for (std::size_t i = 0; i < w.size(); ++i) {
            refs.push_back(Ref{std::fabs(w[i]), v, i});
        }
    }
    const std::size_t zeroed = zero_count(sparsity, refs.size());
    std::stable_sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& b) {
        return a.magnitude < b.magnitude;  // stable keeps ascending-index tie order
    });
    for (std::size_t i = 0; i < zeroed; ++i) {
        auto& layer = work[refs[i].node];
        layer.weights[refs[i].entry] = 0.0;
        layer.mask[refs[i].entry] = 0;
    }
}

void apply_structured_prune(const ModelGraph& graph, const Scheme& op, double sparsity,
                            std::vector<Working>& work) {
    auto nodes = applicable_nodes(graph, op);
    if (nodes.empty()) {
        throw Error(std::string(scheme_kind_name(op.kind)) + ": no applicable layers in model");
    }
    auto structures = enumerate_structures(graph, op, nodes);
    const std::size_t target_zeroed = zero_count(sparsity, structures.size());

    struct Scored {
        double score;
        std::size_t order;  // global enumeration order for tie-breaks
    };
    std::vector<Scored> scored(structures.size());
    for (std::size_t i = 0; i < structures.size(); ++i) {
        const auto& s = structures[i];
        std::vector<double> vals(s.entries.size());
        for (std::size_t k = 0; k < s.entries.size(); ++k) {
            vals[k] = work[s.node].weights[s.entries[k]];
        }
        scored[i] = {score_entries(op.criteria, vals), i};
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) { return a.score < b.score; });

    // count retained structures per layer to honor the floor of one
    std::map<std::size_t, std::size_t> retained;
    for (const auto& s : structures) retained[s.node] += 1;

    std::size_t zeroed = 0;
    for (const auto& cand : scored) {
        if (zeroed == target_zeroed) break;
        const auto& s = structures[cand.order];
        if (retained[s.node] <= 1) continue;  // never empty a layer
        for (std::size_t e : s.entries) {
            work[s.node].weights[e] = 0.0;
            work[s.node].mask[e] = 0;
        }
        retained[s.node] -= 1;
        ++zeroed;
    }
}

void apply_quantize(const ModelGraph& graph, const Scheme& op, std::vector<Working>& work) {
    auto nodes = applicable_nodes(graph, op);
    if (nodes.empty()) throw Error("quantize: no applicable layers in model");
    for (std::size_t v : nodes) {
        auto& layer = work[v];
        for (double& w : layer.weights) w = quantize_half(w);
        for (double& b : layer.bias) b = quantize_half(b);
        layer.quantized = true;
    }
}

}  // namespace

double magnitude_threshold(std::span<const double> weights, double sparsity) {
    if (weights.empty()) throw Error("magnitude_threshold: no parameters");
    const std::size_t zeroed = zero_count(sparsity, weights.size());
    std::vector<double> magnitudes(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) magnitudes[i] = std::fabs(weights[i]);
    std::sort(magnitudes.begin(), magnitudes.end());
    // tau = magnitude of the k-th largest survivor boundary
    return magnitudes[zeroed];
}

CompressedState project(const ModelGraph& graph, std::span<const double> flat_params,
                        const Scheme& scheme, double sparsity) {
    if (!(sparsity >= 0.0) || sparsity >= 1.0) {
        throw Error("sparsity must lie in [0, 1), got " + std::to_string(sparsity));
    }

    // stage working copies from the flat vector
    std::vector<Working> work(graph.node_count());
    {
        std::size_t pos = 0;
        for (std::size_t v = 0; v < graph.node_count(); ++v) {
            const auto& node = graph.nodes[v];
            if (!node.weights) continue;
            auto& layer = work[v];
            layer.present = true;
            const std::size_t wn = node.weights->size();
            if (pos + wn > flat_params.size()) throw Error("project: flat params too short");
            layer.weights.assign(flat_params.begin() + pos, flat_params.begin() + pos + wn);
            layer.mask.assign(wn, 1);
            pos += wn;
            if (node.bias) {
                const std::size_t bn = node.bias->size();
                layer.bias.assign(flat_params.begin() + pos, flat_params.begin() + pos + bn);
                layer.has_bias = true;
                pos += bn;
            }
        }
        if (pos != flat_params.size()) throw Error("project: flat params length mismatch");
    }

    std::vector<const Scheme*> ops;
    if (scheme.kind == Scheme::Kind::Compose) {
        for (const auto& c : scheme.children) ops.push_back(&c);
    } else {
        ops.push_back(&scheme);
    }
    for (const Scheme* op : ops) {
        switch (op->kind) {
            case Scheme::Kind::Prune:
                apply_unstructured_prune(graph, *op, sparsity, work);
                break;
            case Scheme::Kind::NeuronPrune:
            case Scheme::Kind::FilterPrune:
            case Scheme::Kind::BlockPrune:
                apply_structured_prune(graph, *op, sparsity, work);
                break;
            case Scheme::Kind::Quantize:
                apply_quantize(graph, *op, work);
                break;
            case Scheme::Kind::Compose:
                throw Error("nested compose must be flattened");
        }
    }

    CompressedState state;
    state.scheme = scheme;
    state.sparsity = sparsity;
    state.layers.resize(graph.node_count());
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        auto& layer = work[v];
        if (!layer.present) continue;
        auto& payload = state.layers[v];
        payload.present = true;
        payload.quantized = layer.quantized;
        payload.has_bias = layer.has_bias;
        bool all_retained =
            std::all_of(layer.mask.begin(), layer.mask.end(), [](std::uint8_t m) { return m; });
        if (!all_retained) payload.weight_mask = std::move(layer.mask);
        if (layer.quantized) {
            payload.weights_half.resize(layer.weights.size());
            for (std::size_t i = 0; i < layer.weights.size(); ++i) {
                payload.weights_half[i] = half_from_double(layer.weights[i]);
            }
            payload.bias_half.resize(layer.bias.size());
            for (std::size_t i = 0; i < layer.bias.size(); ++i) {
                payload.bias_half[i] = half_from_double(layer.bias[i]);
            }
        } else {
            payload.weights = std::move(layer.weights);
            payload.bias = std::move(layer.bias);
        }
    }
    return state;
}

CompressedState project(const ModelGraph& graph, const Scheme& scheme, double sparsity) {
    auto flat = flatten_params(graph);
    return project(graph, flat, scheme, sparsity);
}

std::vector<double> decompress_params(const ModelGraph& graph, const CompressedState& state) {
    if (state.layers.size() != graph.node_count()) {
        throw Error("decompress: state does not match graph");
    }
    std::vector<double> flat;
    flat.reserve(graph.param_count());
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        const auto& node = graph.nodes[v];
        if (!node.weights) continue;
        const auto& payload = state.layers[v];
        if (!payload.present) throw Error("decompress: missing payload for layer " + node.name);
        const std::size_t wn = node.weights->size();
        for (std::size_t i = 0; i < wn; ++i) {
            double value = payload.quantized ? half_to_double(payload.weights_half[i])
                                             : payload.weights[i];
            if (!payload.weight_mask.empty() && !payload.weight_mask[i]) value = 0.0;
            flat.push_back(value);
        }
        if (node.bias) {
            const std::size_t bn = node.bias->size();
            for (std::size_t i = 0; i < bn; ++i) {
                flat.push_back(payload.quantized ? half_to_double(payload.bias_half[i])
                                                 : payload.bias[i]);
            }
        }
    }
    return flat;
}

ModelGraph decompress_model(const ModelGraph& graph, const CompressedState& state) {
    ModelGraph model = graph;
    auto flat = decompress_params(graph, state);
    set_params(model, flat);
    return model;
}

StructureMasks structure_masks(const ModelGraph& graph, const CompressedState& state) {
    if (!state.scheme.is_structured()) {
        throw Error("structure_masks requires a structured scheme, got " +
                    state.scheme.describe());
    }
    std::vector<const Scheme*> ops;
    if (state.scheme.kind == Scheme::Kind::Compose) {
        for (const auto& c : state.scheme.children) ops.push_back(&c);
    } else {
        ops.push_back(&state.scheme);
    }

    auto flat = decompress_params(graph, state);
    ParamLayout layout = param_layout(graph);

    StructureMasks masks;
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        const auto& node = graph.nodes[v];
        if (!node.weights) continue;
        bool structured_here = std::any_of(ops.begin(), ops.end(), [&](const Scheme* op) {
            return op->is_structured() && op->applies_to(node);
        });
        std::size_t offset = 0;
        for (const auto& chunk : layout.chunks) {
            if (chunk.node == v) {
                offset = chunk.weight_offset;
                break;
            }
        }
        const std::size_t structures = node.weights->dim(0);
        const std::size_t span = node.weights->size() / structures;
        std::vector<std::uint8_t> keep(structures, 1);
        if (structured_here) {
            for (std::size_t sidx = 0; sidx < structures; ++sidx) {
                bool any = false;
                for (std::size_t k = 0; k < span && !any; ++k) {
                    any = flat[offset + sidx * span + k] != 0.0;
                }
                keep[sidx] = any ? 1 : 0;
            }
        }
        masks.keep.emplace(v, std::move(keep));
    }
    return masks;
}

}  // namespace taper
