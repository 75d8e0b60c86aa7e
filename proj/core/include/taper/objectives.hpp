#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "taper/graph.hpp"
#include "taper/schemes.hpp"

namespace taper {

/// Bytes consumed by nonzero parameters at their stored width (4 bytes full
/// precision, 2 bytes half). The reference is the dense full-precision model.
struct FootprintReport {
    std::size_t bytes_total = 0;
    std::size_t reference_bytes = 0;
    double compression_ratio = 1.0;  // r_c = reference / total
    std::vector<std::size_t> bytes_per_layer;
    std::vector<std::size_t> nonzeros_per_layer;
};

FootprintReport memory_footprint(const ModelGraph& graph, const CompressedState& state);
/// Footprint of a plain (uncompressed) model; r_c is 1 by construction.
FootprintReport memory_footprint(const ModelGraph& graph);

/// FLOPs per sample with multiply and add counted separately: dense layers
/// cost 2*m*n, conv layers 2*kh*kw*c_in*c_out*h_out*w_out; ReLU, Flatten and
/// Add are counted as zero.
struct FlopReport {
    std::size_t flops_total = 0;
    std::size_t reference_flops = 0;
    double speedup_ratio = 1.0;  // s_F = reference / total
    std::vector<std::size_t> flops_per_layer;
};

FlopReport count_flops(const ModelGraph& graph, const ModelGraph* reference = nullptr);

/// Deterministic test curves with analytically known level-set crossings.
/// Names: logistic, step, flat, knee.
class SyntheticCurve {
public:
    static SyntheticCurve make(const std::string& name, std::uint64_t seed);

    double operator()(double s) const;
    /// Largest s with value >= level, where a closed form exists.
    std::optional<double> level_crossing(double level) const;
    const std::string& name() const { return name_; }
    /// Curve value at s = 0 (the "baseline" for level-set searches).
    double baseline() const { return (*this)(0.0); }

private:
    std::string name_;
    // logistic/knee: top, mid/knee point, steepness; step: hi, lo, edge;
    // flat: constant
    double a_ = 0.0, b_ = 0.0, c_ = 0.0, d_ = 0.0;
};

}  // namespace taper
