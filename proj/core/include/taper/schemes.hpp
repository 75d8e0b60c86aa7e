#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "taper/graph.hpp"

namespace taper {

enum class Criteria { L2Norm, MeanAbs, MaxAbs };

const char* criteria_name(Criteria c);
Criteria criteria_from_name(const std::string& name);

/// Composable compression operator. A scheme describes the feasible set of
/// the projection: which entries or structures may stay nonzero and at what
/// precision they are stored.
struct Scheme {
    enum class Kind { Prune, Quantize, NeuronPrune, FilterPrune, BlockPrune, Compose };

    Kind kind = Kind::Prune;
    Criteria criteria = Criteria::L2Norm;
    std::vector<std::size_t> block_shape;     // BlockPrune only
    std::vector<std::string> layer_filter;    // empty: default applicability
    std::vector<Scheme> children;             // Compose only, flattened

    static Scheme prune();
    static Scheme quantize();
    static Scheme neuron_prune(Criteria criteria = Criteria::MeanAbs);
    static Scheme filter_prune(Criteria criteria = Criteria::L2Norm);
    static Scheme block_prune(Criteria criteria = Criteria::MeanAbs,
                              std::vector<std::size_t> block_shape = {5, 1});
    static Scheme compose(std::vector<Scheme> schemes);

    /// True if any operator in the tree zeroes whole structures or blocks.
    bool is_structured() const;
    /// True if any operator in the tree prunes (structured or not).
    bool prunes() const;
    /// True if any operator in the tree quantizes.
    bool quantizes() const;
    /// Whether this (leaf) operator touches the given layer.
    bool applies_to(const LayerSpec& node) const;

    std::string describe() const;
};

const char* scheme_kind_name(Scheme::Kind kind);

/// Per-layer compressed payload. Pruning stores values plus a retention
/// mask; quantization stores binary16 bits. Biases are never pruned but are
/// quantized along with the weights.
struct LayerPayload {
    bool present = false;    // node carries parameters touched by the scheme
    bool quantized = false;  // payload stored as binary16
    std::vector<std::uint8_t> weight_mask;  // empty = all retained
    std::vector<double> weights;
    std::vector<std::uint16_t> weights_half;
    std::vector<double> bias;
    std::vector<std::uint16_t> bias_half;
    bool has_bias = false;
};

/// Theta of the compression mapping: what remains after projecting model
/// parameters onto the scheme's feasible set at sparsity s.
struct CompressedState {
    Scheme scheme;
    double sparsity = 0.0;
    std::vector<LayerPayload> layers;  // node-aligned with the source graph
};

/// Magnitude tau such that zeroing all |w| < tau (plus just enough tau-ties
/// in ascending index order) leaves exactly total - floor(s * total)
/// nonzeros.
double magnitude_threshold(std::span<const double> weights, double sparsity);

/// Euclidean projection of the flat parameter vector onto the scheme's
/// feasible set. Compose applies operators left to right.
CompressedState project(const ModelGraph& graph, std::span<const double> flat_params,
                        const Scheme& scheme, double sparsity);
CompressedState project(const ModelGraph& graph, const Scheme& scheme, double sparsity);

/// Delta of Eq-style decompression: masked values widened back to doubles,
/// in flat parameter order.
std::vector<double> decompress_params(const ModelGraph& graph, const CompressedState& state);

/// Copy of the graph with parameters replaced by the decompressed values.
ModelGraph decompress_model(const ModelGraph& graph, const CompressedState& state);

/// Per-node structure retention flags (rows for Dense, filters for Conv2d).
/// A structure is marked zero iff all its weight entries are zero.
struct StructureMasks {
    std::map<std::size_t, std::vector<std::uint8_t>> keep;  // node id -> flags
};

/// Derives thinning masks from a structured compression state. Errors on
/// unstructured or quantize-only states.
StructureMasks structure_masks(const ModelGraph& graph, const CompressedState& state);

}  // namespace taper
