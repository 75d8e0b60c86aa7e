#include "taper/lc.hpp"

#include <algorithm>
#include <cmath>

#include "taper/error.hpp"
#include "taper/half.hpp"
#include "taper/net.hpp"
#include "taper/rng.hpp"
#include "taper/train.hpp"

namespace taper {

void LcConfig::validate() const {
    if (!(mu0 > 0.0)) throw ConfigError("mu0 must be > 0");
    if (!(growth > 1.0)) throw ConfigError("mu growth factor must be > 1");
    if (outer_iters == 0) throw ConfigError("outer_iters must be >= 1");
    if (!(lr_hi >= lr_lo && lr_lo > 0.0)) throw ConfigError("need lr_hi >= lr_lo > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
}

double LcConfig::mu(std::size_t j) const {
    return mu0 * std::pow(growth, static_cast<double>(j));
}

double LcConfig::learning_rate(std::size_t j) const {
    if (outer_iters <= 1) return lr_hi;
    const double frac = static_cast<double>(j) / static_cast<double>(outer_iters - 1);
    return lr_hi * std::pow(lr_lo / lr_hi, frac);
}

double mu_schedule(const LcConfig& cfg, std::size_t j) { return cfg.mu(j); }

std::vector<double> penalty_gradient(const std::vector<double>& w,
                                     const std::vector<double>& decompressed,
                                     const std::vector<double>& lambda, double mu) {
    if (w.size() != decompressed.size() || w.size() != lambda.size()) {
        throw Error("penalty_gradient: size mismatch");
    }
    std::vector<double> grad(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        grad[i] = mu * (w[i] - decompressed[i]) - lambda[i];
    }
    return grad;
}

namespace {

// Deterministic cyclic batch sampler: a shuffled pass over the split,
// reshuffled when exhausted.
class BatchSampler {
public:
    BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
        : n_(n), batch_size_(std::min(batch_size, n)), rng_(make_rng(seed)) {
        reshuffle();
    }

    std::pair<std::size_t, std::size_t> next_range() {
        if (cursor_ + batch_size_ > n_) reshuffle();
        const std::size_t begin = cursor_;
        cursor_ += batch_size_;
        return {begin, begin + batch_size_};
    }

    const std::vector<std::size_t>& order() const { return order_; }

private:
    void reshuffle() {
        order_ = shuffled_indices(n_, rng_);
        cursor_ = 0;
    }

    std::size_t n_, batch_size_, cursor_ = 0;
    std::vector<std::size_t> order_;
    std::mt19937_64 rng_;
};

}  // namespace

void l_step(LcState& state, const ModelGraph& arch, const Dataset& dataset, const LcConfig& cfg) {
    const std::size_t j = state.iteration;
    const std::size_t batches = j == 0 ? cfg.first_l_step_batches : cfg.l_step_batches;
    const double mu = cfg.mu(j);
    const auto train_set = dataset.train_split();

    ModelGraph model = arch;
    set_params(model, state.w);
    const auto decompressed = decompress_params(arch, state.theta);

    if (batches == 0) {
        // nothing to run; record the current full-split data loss
        auto [loss, grads] = loss_and_grad(model, train_set.inputs, train_set.labels);
        (void)grads;
        state.last_l_step_loss = loss;
        return;
    }

    TrainConfig step_cfg;
    step_cfg.learning_rate = cfg.learning_rate(j);
    step_cfg.momentum = cfg.momentum;
    step_cfg.batch_size = cfg.batch_size;

    SgdState sgd;  // fresh momentum per L-step; the learning rate changed
    BatchSampler sampler(train_set.size(), cfg.batch_size,
                         derive_seed(derive_seed(cfg.seed, "l_step"), j));
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
        auto [begin, end] = sampler.next_range();
        auto [batch, labels] = train_set.gather(sampler.order(), begin, end);
        auto [loss, grads] = loss_and_grad(model, batch, labels);
        if (!std::isfinite(loss)) {
            throw NumericError("L-step diverged at outer iteration " + std::to_string(j) +
                               ", batch " + std::to_string(b));
        }
        loss_sum += loss;
        auto flat = flatten_grads(model, grads);
        for (std::size_t i = 0; i < flat.size(); ++i) {
            flat[i] += mu * (state.w[i] - decompressed[i]) - state.lambda[i];
        }
        sgd_step(state.w, flat, step_cfg, sgd);
        set_params(model, state.w);
    }
    state.last_l_step_loss = loss_sum / static_cast<double>(batches);
}

void c_step(LcState& state, const ModelGraph& arch, const Scheme& scheme, double sparsity,
            const LcConfig& cfg) {
    const double mu = cfg.mu(state.iteration);
    std::vector<double> target = state.w;
    for (std::size_t i = 0; i < target.size(); ++i) target[i] -= state.lambda[i] / mu;
    state.theta = project(arch, target, scheme, sparsity);
    if (cfg.mode == LcConfig::MultiplierMode::AugmentedLagrangian) {
        const auto decompressed = decompress_params(arch, state.theta);
        for (std::size_t i = 0; i < state.lambda.size(); ++i) {
            state.lambda[i] -= mu * (state.w[i] - decompressed[i]);
        }
    }
}

namespace {

double constraint_gap(const std::vector<double>& w, const std::vector<double>& decompressed) {
    double gap = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        gap = std::max(gap, std::fabs(w[i] - decompressed[i]));
    }
    return gap;
}

// Post-phase: projected SGD on the surviving weights, pruned entries frozen.
void fine_tune(LcState& state, const ModelGraph& arch, const Scheme& scheme, double sparsity,
               const Dataset& dataset, const LcConfig& cfg) {
    const auto train_set = dataset.train_split();
    ModelGraph model = arch;
    std::vector<double> params = state.best_params;
    set_params(model, params);

    // frozen-entry flags from the best snapshot's masks
    std::vector<std::uint8_t> frozen(params.size(), 0);
    {
        ParamLayout layout = param_layout(arch);
        for (const auto& chunk : layout.chunks) {
            const auto& payload = state.best_theta.layers[chunk.node];
            if (!payload.present || payload.weight_mask.empty()) continue;
            for (std::size_t i = 0; i < chunk.weight_count; ++i) {
                if (!payload.weight_mask[i]) frozen[chunk.weight_offset + i] = 1;
            }
        }
    }

    TrainConfig step_cfg;
    step_cfg.learning_rate = cfg.lr_lo;
    step_cfg.momentum = cfg.momentum;
    step_cfg.batch_size = cfg.batch_size;
    SgdState sgd;
    BatchSampler sampler(train_set.size(), cfg.batch_size, derive_seed(cfg.seed, "fine_tune"));
    for (std::size_t b = 0; b < cfg.fine_tune_batches; ++b) {
        auto [begin, end] = sampler.next_range();
        auto [batch, labels] = train_set.gather(sampler.order(), begin, end);
        auto [loss, grads] = loss_and_grad(model, batch, labels);
        if (!std::isfinite(loss)) {
            throw NumericError("fine-tune diverged at batch " + std::to_string(b));
        }
        auto flat = flatten_grads(model, grads);
        for (std::size_t i = 0; i < flat.size(); ++i) {
            if (frozen[i]) flat[i] = 0.0;
        }
        sgd_step(params, flat, step_cfg, sgd);
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (frozen[i]) params[i] = 0.0;
        }
        set_params(model, params);
    }

    // restore feasibility exactly, then keep the result only if it helps
    CompressedState tuned = project(arch, params, scheme, sparsity);
    const auto decompressed = decompress_params(arch, tuned);
    ModelGraph candidate = arch;
    set_params(candidate, decompressed);
    const double val_acc = evaluate(candidate, dataset.val_split());
    if (val_acc > state.best_val_accuracy) {
        state.best_val_accuracy = val_acc;
        state.best_params = decompressed;
        state.best_theta = std::move(tuned);
    }
}

}  // namespace

LcResult lc_run(const ModelGraph& reference, const Scheme& scheme, double sparsity,
                const Dataset& dataset, const LcConfig& cfg) {
    cfg.validate();
    dataset.validate();

    LcState state;
    state.w = flatten_params(reference);
    state.lambda.assign(state.w.size(), 0.0);
    state.theta = project(reference, scheme, sparsity);  // L-step target for j = 0

    const auto val_set = dataset.val_split();
    std::vector<LcTraceRow> trace;
    trace.reserve(cfg.outer_iters);

    for (std::size_t j = 0; j < cfg.outer_iters; ++j) {
        state.iteration = j;
        l_step(state, reference, dataset, cfg);
        c_step(state, reference, scheme, sparsity, cfg);

        const auto decompressed = decompress_params(reference, state.theta);
        ModelGraph candidate = reference;
        set_params(candidate, decompressed);
        const double val_acc = evaluate(candidate, val_set);
        if (val_acc > state.best_val_accuracy) {
            state.best_val_accuracy = val_acc;
            state.best_params = decompressed;
            state.best_theta = state.theta;
        }

        LcTraceRow row;
        row.iter = j + 1;
        row.mu = cfg.mu(j);
        row.loss = state.last_l_step_loss;
        row.constraint_gap = constraint_gap(state.w, decompressed);
        row.val_accuracy = val_acc;
        trace.push_back(row);
    }

    if (cfg.fine_tune_batches > 0 && scheme.prunes()) {
        fine_tune(state, reference, scheme, sparsity, dataset, cfg);
    }

    LcResult result{reference, state.best_val_accuracy, std::move(state.best_theta),
                    std::move(trace)};
    set_params(result.model, state.best_params);
    return result;
}

}  // namespace taper
