#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "taper/dataset.hpp"
#include "taper/graph.hpp"
#include "taper/net.hpp"

namespace taper {

struct TrainConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;  // in [0, 1)
    std::size_t batch_size = 32;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Momentum buffer aligned with the flat parameter vector.
struct SgdState {
    std::vector<double> velocity;
};

/// v <- momentum * v - lr * g;  p <- p + v
void sgd_step(std::span<double> params, std::span<const double> grads, const TrainConfig& cfg,
              SgdState& state);

struct EpochStats {
    double mean_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

/// Kaiming-uniform fan-in init for weights, zero biases. Deterministic.
void init_params(ModelGraph& model, std::uint64_t seed);

/// Mini-batch SGD with a deterministic per-epoch shuffle derived from the
/// config seed. Throws NumericError on divergence.
TrainHistory train(ModelGraph& model, const Dataset& dataset, const TrainConfig& cfg);

/// Fraction of correct argmax predictions; argmax ties resolve to the lowest
/// class index.
double evaluate(const ModelGraph& model, const Dataset::Split& split);

}  // namespace taper
