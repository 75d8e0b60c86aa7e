#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "taper/dataset.hpp"
#include "taper/error.hpp"
#include "taper/graph.hpp"
#include "taper/layer.hpp"
#include "taper/net.hpp"
#include "taper/rng.hpp"
#include "taper/train.hpp"

using namespace taper;

namespace {

void randomize(ModelGraph& model, std::uint64_t seed, double scale = 1.0) {
    auto rng = make_rng(seed);
    for (auto& node : model.nodes) {
        if (node.weights) {
            for (double& w : node.weights->values()) w = scale * normal(rng);
        }
        if (node.bias) {
            for (double& b : node.bias->values()) b = scale * normal(rng);
        }
    }
}

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
    auto rng = make_rng(seed);
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = normal(rng);
    return t;
}

}  // namespace

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(Tensor({2, 0}), Error);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), Error);
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.reshaped({3, 2}).shape() == std::vector<std::size_t>{3, 2});
    CHECK_THROWS_AS(t.reshaped({4}), Error);
}

TEST_CASE("dense forward: identity weights pass input through") {
    auto layer = dense_layer("d", 2, 2);
    (*layer.weights)[0] = 1.0;
    (*layer.weights)[3] = 1.0;
    ModelGraph model = chain_graph({2}, {layer});
    Tensor out = forward(model, Tensor({1, 2}, {3.0, 4.0}));
    CHECK(out[0] == doctest::Approx(3.0));
    CHECK(out[1] == doctest::Approx(4.0));
}

TEST_CASE("zero input with zero biases gives zero logits") {
    ModelGraph model = chain_graph(
        {4}, {dense_layer("d0", 4, 3), relu_layer("r0"), dense_layer("d1", 3, 2)});
    randomize(model, 11);
    for (auto& node : model.nodes) {
        if (node.bias) {
            for (double& b : node.bias->values()) b = 0.0;
        }
    }
    Tensor out = forward(model, Tensor::zeros({2, 4}));
    for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("forward matches naive matmul oracle on a dense chain") {
    ModelGraph model = chain_graph(
        {4}, {dense_layer("d0", 4, 3), relu_layer("r0"), dense_layer("d1", 3, 2)});
    randomize(model, 42);
    Tensor x = random_tensor({5, 4}, 43);

    Tensor got = forward(model, x);
    Tensor h = oracles::naive_dense(x, *model.nodes[0].weights, &*model.nodes[0].bias);
    for (double& v : h.values()) v = std::max(v, 0.0);
    Tensor want = oracles::naive_dense(h, *model.nodes[2].weights, &*model.nodes[2].bias);
    for (std::size_t i = 0; i < want.size(); ++i) {
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("forward is purely functional") {
    ModelGraph model = chain_graph({4}, {dense_layer("d0", 4, 4), relu_layer("r"),
                                         dense_layer("d1", 4, 2)});
    randomize(model, 3);
    Tensor x = random_tensor({3, 4}, 4);
    Tensor a = forward(model, x);
    Tensor b = forward(model, x);
    CHECK(a.values() == b.values());
}

TEST_CASE("forward rejects shape mismatches naming the layer") {
    ModelGraph model = chain_graph({4}, {dense_layer("d0", 4, 3)});
    CHECK_THROWS_WITH_AS(forward(model, Tensor::zeros({2, 5})),
                         doctest::Contains("does not match model input shape"), Error);
    // a tampered graph fails at the offending layer
    ModelGraph broken = model;
    broken.nodes[0].weights = Tensor({3, 7});
    CHECK_THROWS_WITH_AS(forward(broken, Tensor::zeros({2, 4})), doctest::Contains("d0"), Error);
}

TEST_CASE("conv2d forward equals im2col oracle across shapes") {
    struct Case {
        std::size_t c_in, c_out, h, w, k, stride, padding;
    };
    for (const Case& c : {Case{1, 1, 4, 4, 3, 1, 0}, Case{3, 4, 8, 8, 3, 1, 1},
                          Case{2, 3, 7, 5, 3, 2, 1}, Case{3, 2, 8, 8, 1, 1, 0}}) {
        auto layer = conv2d_layer("c", c.c_in, c.c_out, c.k, c.k, c.stride, c.padding);
        ModelGraph model = chain_graph({c.c_in, c.h, c.w}, {layer});
        randomize(model, 100 + c.c_out);
        Tensor x = random_tensor({2, c.c_in, c.h, c.w}, 200 + c.c_out);
        Tensor got = forward(model, x);
        Tensor want = oracles::im2col_conv2d(x, *model.nodes[0].weights,
                                             &*model.nodes[0].bias, model.nodes[0].conv);
        REQUIRE(got.shape() == want.shape());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(std::fabs(got[i] - want[i]) <= 1e-10);
        }
    }
}

TEST_CASE("softmax cross-entropy basics") {
    // uniform logits: ln(number of classes)
    CHECK(softmax_cross_entropy(Tensor({1, 2}), std::vector<int>{1}, nullptr) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // saturated logits stay finite via log-sum-exp
    double loss =
        softmax_cross_entropy(Tensor({1, 2}, {1e3, -1e3}), std::vector<int>{0}, nullptr);
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS_AS(softmax_cross_entropy(Tensor({1, 2}), std::vector<int>{2}, nullptr), Error);
}

TEST_CASE("softmax cross-entropy is translation invariant") {
    auto rng = make_rng(7);
    Tensor logits({4, 3});
    for (double& v : logits.values()) v = normal(rng);
    std::vector<int> labels = {0, 2, 1, 1};
    double base = softmax_cross_entropy(logits, labels, nullptr);
    Tensor shifted = logits;
    for (double& v : shifted.values()) v += 123.456;
    CHECK(std::fabs(softmax_cross_entropy(shifted, labels, nullptr) - base) < 1e-10);
}

TEST_CASE("gradients match central finite differences on every layer kind") {
    // dense + relu + conv paths, including a residual add
    auto conv1 = conv2d_layer("c1", 2, 3, 3, 3, 1, 1);
    auto conv2 = conv2d_layer("c2", 3, 3, 3, 3, 1, 1);
    ModelGraph model;
    model.input_shape = {2, 4, 4};
    model.nodes = {conv1, relu_layer("r1"), conv2, add_layer("skip"), flatten_layer("f"),
                   dense_layer("d", 48, 2)};
    model.preds = {{}, {0}, {1}, {0, 2}, {3}, {4}};
    model.output_node = 5;
    model = trace_graph(model);
    randomize(model, 21, 0.5);

    Tensor x = random_tensor({2, 2, 4, 4}, 22);
    std::vector<int> labels = {0, 1};

    auto [loss, grads] = loss_and_grad(model, x, labels);
    auto flat = flatten_grads(model, grads);

    ModelGraph probe = model;
    auto fd = oracles::finite_difference_gradient(
        [&](const std::vector<double>& params) {
            set_params(probe, params);
            return softmax_cross_entropy(forward(probe, x), labels, nullptr);
        },
        flatten_params(model));
    CHECK(oracles::max_relative_error(flat, fd) <= 1e-3);
    CHECK(std::isfinite(loss));
}

TEST_CASE("loss_and_grad reports the layer index on non-finite activations") {
    ModelGraph model = chain_graph({2}, {dense_layer("d0", 2, 2)});
    (*model.nodes[0].weights)[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(loss_and_grad(model, Tensor({1, 2}, {1.0, 1.0}), std::vector<int>{0}),
                    NumericError);
}

TEST_CASE("sgd_step follows the momentum update rule") {
    TrainConfig cfg;
    cfg.momentum = 0.0;
    cfg.learning_rate = 0.1;
    std::vector<double> p = {1.0};
    std::vector<double> g = {2.0};
    SgdState st;
    sgd_step(p, g, cfg, st);
    CHECK(p[0] == doctest::Approx(0.8));

    // zero gradient with zero velocity is a fixed point
    std::vector<double> q = {0.3, -0.7};
    std::vector<double> zero = {0.0, 0.0};
    SgdState st2;
    sgd_step(q, zero, cfg, st2);
    CHECK(q == std::vector<double>{0.3, -0.7});

    // two momentum steps with constant gradient: p = -0.1 - 0.19 = -0.29
    cfg.momentum = 0.9;
    std::vector<double> r = {0.0};
    std::vector<double> one = {1.0};
    SgdState st3;
    sgd_step(r, one, cfg, st3);
    sgd_step(r, one, cfg, st3);
    CHECK(r[0] == doctest::Approx(-0.29));
}

TEST_CASE("evaluate breaks argmax ties toward the lowest class") {
    // constant-logit model: weights and biases all zero
    ModelGraph model = chain_graph({2}, {dense_layer("d", 2, 2)});
    Dataset ds = make_blobs(100, 5);
    auto split = ds.train_split();
    double acc = evaluate(model, split);
    std::size_t zeros = 0;
    for (int l : split.labels) zeros += l == 0;
    CHECK(acc == doctest::Approx(static_cast<double>(zeros) / split.size()));
    CHECK(acc == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("training on separable blobs reaches high validation accuracy") {
    Dataset ds = make_blobs(200, 17);
    ModelGraph model = chain_graph(
        {2}, {dense_layer("d0", 2, 8), relu_layer("r"), dense_layer("d1", 8, 2)});
    init_params(model, 17);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.seed = 17;
    auto history = train(model, ds, cfg);
    REQUIRE(history.size() == 50);
    CHECK(history.back().val_accuracy >= 0.97);
    // evaluate() agrees with the recorded history
    CHECK(evaluate(model, ds.val_split()) == doctest::Approx(history.back().val_accuracy));
}

TEST_CASE("zero epochs leave the model untouched") {
    Dataset ds = make_blobs(50, 3);
    ModelGraph model = chain_graph({2}, {dense_layer("d", 2, 2)});
    init_params(model, 9);
    auto before = flatten_params(model);
    TrainConfig cfg;
    cfg.epochs = 0;
    auto history = train(model, ds, cfg);
    CHECK(history.empty());
    CHECK(flatten_params(model) == before);
}

TEST_CASE("training is bit-deterministic under a fixed seed") {
    Dataset ds = make_blobs(120, 23);
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.seed = 99;
    std::vector<double> runs[2];
    for (int run = 0; run < 2; ++run) {
        ModelGraph model = chain_graph(
            {2}, {dense_layer("d0", 2, 6), relu_layer("r"), dense_layer("d1", 6, 2)});
        init_params(model, 55);
        train(model, ds, cfg);
        runs[run] = flatten_params(model);
    }
    CHECK(runs[0] == runs[1]);
}

TEST_CASE("training throws NumericError on divergence") {
    Dataset ds = make_blobs(60, 2);
    ModelGraph model = chain_graph(
        {2}, {dense_layer("d0", 2, 4), relu_layer("r"), dense_layer("d1", 4, 2)});
    init_params(model, 1);
    TrainConfig cfg;
    // the product of two exploded layers overflows the activations
    cfg.learning_rate = 1e160;
    cfg.epochs = 3;
    CHECK_THROWS_AS(train(model, ds, cfg), NumericError);
}

TEST_CASE("dataset invariants and splits") {
    Dataset ds = make_blobs(100, 1);
    CHECK(ds.train_split().size() == 90);
    CHECK(ds.val_split().size() == 10);
    CHECK(ds.num_classes() == 2);
    Dataset bad = ds;
    bad.train_fraction = 1.5;
    CHECK_THROWS_AS(bad.validate(), Error);
}
