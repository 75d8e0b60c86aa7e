#include "taper/train.hpp"

#include <cmath>

#include "taper/error.hpp"
#include "taper/rng.hpp"

namespace taper {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
}

void sgd_step(std::span<double> params, std::span<const double> grads, const TrainConfig& cfg,
              SgdState& state) {
    if (params.size() != grads.size()) throw Error("sgd_step: params/grads size mismatch");
    if (state.velocity.empty()) state.velocity.assign(params.size(), 0.0);
    if (state.velocity.size() != params.size()) {
        throw Error("sgd_step: velocity size mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        double v = cfg.momentum * state.velocity[i] - cfg.learning_rate * grads[i];
        state.velocity[i] = v;
        params[i] += v;
    }
}

void init_params(ModelGraph& model, std::uint64_t seed) {
    auto rng = make_rng(derive_seed(seed, "init"));
    for (auto& node : model.nodes) {
        if (!node.weights) continue;
        std::size_t fan_in = 0;
        if (node.kind == LayerKind::Dense) {
            fan_in = node.weights->dim(1);
        } else if (node.kind == LayerKind::Conv2d) {
            fan_in = node.weights->dim(1) * node.conv.kernel_h * node.conv.kernel_w;
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& w : node.weights->values()) w = uniform_real(rng, -bound, bound);
        if (node.bias) {
            for (double& b : node.bias->values()) b = 0.0;
        }
    }
}

TrainHistory train(ModelGraph& model, const Dataset& dataset, const TrainConfig& cfg) {
    cfg.validate();
    dataset.validate();
    const auto train_set = dataset.train_split();
    const auto val_set = dataset.val_split();

    auto params = flatten_params(model);
    SgdState sgd;
    TrainHistory history;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto epoch_rng = make_rng(derive_seed(derive_seed(cfg.seed, "shuffle"), epoch));
        auto order = shuffled_indices(train_set.size(), epoch_rng);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            auto [batch, batch_labels] = train_set.gather(order, begin, end);
            auto [loss, grads] = loss_and_grad(model, batch, batch_labels);
            if (!std::isfinite(loss)) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batches));
            }
            auto flat_grads = flatten_grads(model, grads);
            sgd_step(params, flat_grads, cfg, sgd);
            set_params(model, params);
            loss_sum += loss;
            ++batches;
        }

        EpochStats stats;
        stats.mean_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        stats.train_accuracy = evaluate(model, train_set);
        stats.val_accuracy = evaluate(model, val_set);
        history.push_back(stats);
    }
    return history;
}

double evaluate(const ModelGraph& model, const Dataset::Split& split) {
    if (split.size() == 0) throw Error("evaluate: empty split");
    Tensor logits = forward(model, split.inputs);
    const std::size_t classes = logits.dim(1);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < split.size(); ++i) {
        const double* z = logits.data() + i * classes;
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c) {
            if (z[c] > z[best]) best = c;  // strict: ties keep the lowest index
        }
        if (static_cast<int>(best) == split.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(split.size());
}

}  // namespace taper
