#pragma once

#include <vector>

#include "taper/graph.hpp"
#include "taper/schemes.hpp"

namespace taper {

/// Per-node retained index sets along the structured output axis (rows for
/// Dense, filters for Conv2d) plus the induced input-axis sets. Shape-neutral
/// nodes carry the propagated channel set of their producer.
struct ThinningPlan {
    std::vector<std::vector<std::size_t>> out_keep;
    std::vector<std::vector<std::size_t>> in_keep;

    bool is_identity(const ModelGraph& graph) const;
};

/// Dependency analysis: turns structure masks into consistent retained sets.
/// Add nodes force the union of both branch sets onto both producers; the
/// output layer's structures are never removed; retained sets are expanded
/// across Flatten. Throws "degenerate layer" if a mask empties a layer.
ThinningPlan plan_thinning(const ModelGraph& graph, const StructureMasks& masks);

/// Physically slices weights and biases down to the retained indices and
/// re-traces shapes. Biases of removed structures are dropped.
ModelGraph apply_thinning(const ModelGraph& graph, const ThinningPlan& plan);

/// plan + apply in one step.
ModelGraph thin_model(const ModelGraph& graph, const StructureMasks& masks);

/// Reference behavior of a thinned network: the same graph with masked
/// structures (weights and biases) zeroed in place. Thinning must match this
/// model's forward output exactly.
ModelGraph apply_structure_masks(const ModelGraph& graph, const StructureMasks& masks);

}  // namespace taper
