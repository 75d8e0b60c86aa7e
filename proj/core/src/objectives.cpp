#include "taper/objectives.hpp"

#include <cmath>
#include <limits>

#include "taper/error.hpp"
#include "taper/half.hpp"

namespace taper {

namespace {

std::size_t count_nonzero(const std::vector<double>& values) {
    std::size_t n = 0;
    for (double v : values) {
        if (v != 0.0) ++n;
    }
    return n;
}

}  // namespace

FootprintReport memory_footprint(const ModelGraph& graph, const CompressedState& state) {
    if (state.layers.size() != graph.node_count()) {
        throw Error("memory_footprint: state does not match graph");
    }
    FootprintReport report;
    report.reference_bytes = graph.param_count() * 4;
    report.bytes_per_layer.assign(graph.node_count(), 0);
    report.nonzeros_per_layer.assign(graph.node_count(), 0);
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        const auto& node = graph.nodes[v];
        if (!node.weights) continue;
        const auto& payload = state.layers[v];
        if (!payload.present) throw Error("memory_footprint: missing payload");
        const std::size_t dtype_bytes = payload.quantized ? 2 : 4;
        std::size_t nnz = 0;
        const std::size_t wn = node.weights->size();
        for (std::size_t i = 0; i < wn; ++i) {
            double value = payload.quantized ? half_to_double(payload.weights_half[i])
                                             : payload.weights[i];
            if (!payload.weight_mask.empty() && !payload.weight_mask[i]) value = 0.0;
            if (value != 0.0) ++nnz;
        }
        if (payload.has_bias) {
            const std::size_t bn = node.bias ? node.bias->size() : 0;
            for (std::size_t i = 0; i < bn; ++i) {
                double value = payload.quantized ? half_to_double(payload.bias_half[i])
                                                 : payload.bias[i];
                if (value != 0.0) ++nnz;
            }
        }
        report.nonzeros_per_layer[v] = nnz;
        report.bytes_per_layer[v] = nnz * dtype_bytes;
        report.bytes_total += nnz * dtype_bytes;
    }
    report.compression_ratio =
        report.bytes_total
            ? static_cast<double>(report.reference_bytes) / static_cast<double>(report.bytes_total)
            : std::numeric_limits<double>::infinity();
    return report;
}

FootprintReport memory_footprint(const ModelGraph& graph) {
    FootprintReport report;
    report.reference_bytes = graph.param_count() * 4;
    report.bytes_per_layer.assign(graph.node_count(), 0);
    report.nonzeros_per_layer.assign(graph.node_count(), 0);
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        const auto& node = graph.nodes[v];
        if (!node.weights) continue;
        std::size_t nnz = count_nonzero(node.weights->values());
        if (node.bias) nnz += count_nonzero(node.bias->values());
        report.nonzeros_per_layer[v] = nnz;
        report.bytes_per_layer[v] = nnz * 4;
        report.bytes_total += nnz * 4;
    }
    report.compression_ratio =
        report.bytes_total
            ? static_cast<double>(report.reference_bytes) / static_cast<double>(report.bytes_total)
            : std::numeric_limits<double>::infinity();
    return report;
}

FlopReport count_flops(const ModelGraph& graph, const ModelGraph* reference) {
    FlopReport report;
    report.flops_per_layer.assign(graph.node_count(), 0);
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        const auto& node = graph.nodes[v];
        if (node.out_shape.empty()) {
            throw Error("count_flops: unresolved shapes; trace the graph first");
        }
        std::size_t flops = 0;
        if (node.kind == LayerKind::Dense) {
            flops = 2 * node.weights->dim(0) * node.weights->dim(1);
        } else if (node.kind == LayerKind::Conv2d) {
            const auto& w = *node.weights;
            flops = 2 * w.dim(2) * w.dim(3) * w.dim(1) * w.dim(0) * node.out_shape[1] *
                    node.out_shape[2];
        }
        report.flops_per_layer[v] = flops;
        report.flops_total += flops;
    }
    if (reference) {
        report.reference_flops = count_flops(*reference).flops_total;
    } else {
        report.reference_flops = report.flops_total;
    }
    report.speedup_ratio = report.flops_total
                               ? static_cast<double>(report.reference_flops) /
                                     static_cast<double>(report.flops_total)
                               : 1.0;
    return report;
}

SyntheticCurve SyntheticCurve::make(const std::string& name, std::uint64_t /*seed*/) {
    SyntheticCurve curve;
    curve.name_ = name;
    if (name == "logistic") {
        curve.a_ = 0.93;  // top
        curve.b_ = 0.85;  // midpoint
        curve.c_ = 40.0;  // steepness
    } else if (name == "step") {
        curve.a_ = 0.93;  // hi
        curve.b_ = 0.5;   // edge
        curve.c_ = 0.0;   // lo
    } else if (name == "flat") {
        curve.a_ = 0.93;
    } else if (name == "knee") {
        curve.a_ = 0.93;  // top
        curve.b_ = 0.7;   // knee location
        curve.c_ = 60.0;  // sharpness
        curve.d_ = 2.0;   // post-knee slope
    } else {
        throw Error("unknown synthetic curve '" + name + "'");
    }
    return curve;
}

double SyntheticCurve::operator()(double s) const {
    if (name_ == "logistic") return a_ / (1.0 + std::exp(c_ * (s - b_)));
    if (name_ == "step") return s < b_ ? a_ : c_;
    if (name_ == "flat") return a_;
    // knee: top minus a sharpened softplus ramp starting at the knee
    return a_ - d_ * std::log1p(std::exp(c_ * (s - b_))) / c_;
}

std::optional<double> SyntheticCurve::level_crossing(double level) const {
    if (name_ == "logistic") {
        if (level <= 0.0 || level >= a_) return std::nullopt;
        return b_ + std::log(a_ / level - 1.0) / c_;
    }
    if (name_ == "step") {
        if (level <= c_ || level > a_) return std::nullopt;
        return b_;  // open boundary: every s < edge is feasible
    }
    if (name_ == "flat") {
        return level <= a_ ? std::optional<double>(1.0) : std::nullopt;
    }
    if (level >= a_ || level <= 0.0) return std::nullopt;
    const double ramp = (a_ - level) / d_;  // softplus value at the crossing
    const double inner = std::expm1(c_ * ramp);
    if (inner <= 0.0) return std::nullopt;
    return b_ + std::log(inner) / c_;
}

}  // namespace taper
