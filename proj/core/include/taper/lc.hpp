#pragma once

#include <cstdint>
#include <vector>

#include "taper/dataset.hpp"
#include "taper/graph.hpp"
#include "taper/schemes.hpp"

namespace taper {

/// Alternating learning/compression settings. The penalty weight follows
/// mu_j = mu0 * growth^j; the learning rate decays geometrically from lr_hi
/// to lr_lo across outer iterations.
struct LcConfig {
    double mu0 = 1e-3;
    double growth = 1.1;  // a > 1
    std::size_t outer_iters = 20;
    std::size_t l_step_batches = 100;
    std::size_t first_l_step_batches = 300;
    double lr_hi = 0.1;
    double lr_lo = 1e-5;
    double momentum = 0.9;
    std::size_t batch_size = 32;

    enum class MultiplierMode { PenaltyOnly, AugmentedLagrangian };
    MultiplierMode mode = MultiplierMode::AugmentedLagrangian;

    /// Optional post-phase: train only unmasked weights (off by default).
    std::size_t fine_tune_batches = 0;

    std::uint64_t seed = 0;

    void validate() const;
    double mu(std::size_t j) const;
    double learning_rate(std::size_t j) const;
};

double mu_schedule(const LcConfig& cfg, std::size_t j);

/// Mutable optimizer state across outer iterations.
struct LcState {
    std::vector<double> w;       // current uncompressed parameters
    CompressedState theta;       // current compressed parameterization
    std::vector<double> lambda;  // multiplier estimates; zero in penalty mode
    std::size_t iteration = 0;   // j

    double best_val_accuracy = -1.0;
    std::vector<double> best_params;  // Delta(theta) snapshot at best val
    CompressedState best_theta;

    double last_l_step_loss = 0.0;
};

struct LcTraceRow {
    std::size_t iter = 0;
    double mu = 0.0;
    double loss = 0.0;
    double constraint_gap = 0.0;  // max-norm of w - Delta(theta)
    double val_accuracy = 0.0;
};

struct LcResult {
    ModelGraph model;   // Delta(theta) at the best validation accuracy
    double accuracy;    // that best validation accuracy, A(s)
    CompressedState state;
    std::vector<LcTraceRow> trace;
};

/// One learning step: l_step_batches SGD steps on
/// loss(w) + (mu_j / 2) ||w - Delta(theta) - lambda / mu_j||^2.
void l_step(LcState& state, const ModelGraph& arch, const Dataset& dataset, const LcConfig& cfg);

/// One compression step: theta <- project(w - lambda / mu_j); in augmented-
/// Lagrangian mode lambda <- lambda - mu_j (w - Delta(theta)).
void c_step(LcState& state, const ModelGraph& arch, const Scheme& scheme, double sparsity,
            const LcConfig& cfg);

/// Gradient of the quadratic coupling term: mu (w - Delta(theta)) - lambda.
/// Exposed for gradient checking.
std::vector<double> penalty_gradient(const std::vector<double>& w,
                                     const std::vector<double>& decompressed,
                                     const std::vector<double>& lambda, double mu);

/// Full alternation loop. Returns the compressed model snapshot with the
/// best validation accuracy, evaluated on Delta(theta) after every C-step.
LcResult lc_run(const ModelGraph& reference, const Scheme& scheme, double sparsity,
                const Dataset& dataset, const LcConfig& cfg);

}  // namespace taper
