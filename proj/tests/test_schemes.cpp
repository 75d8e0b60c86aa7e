#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "taper/error.hpp"
#include "taper/graph.hpp"
#include "taper/half.hpp"
#include "taper/net.hpp"
#include "taper/rng.hpp"
#include "taper/schemes.hpp"

using namespace taper;

namespace {

ModelGraph single_dense(std::size_t in, std::size_t out, std::uint64_t seed, bool bias = false) {
    ModelGraph g = chain_graph({in}, {dense_layer("d", in, out, bias)});
    auto rng = make_rng(seed);
    for (double& w : g.nodes[0].weights->values()) w = normal(rng);
    if (bias) {
        for (double& b : g.nodes[0].bias->values()) b = normal(rng);
    }
    return g;
}

double projection_distance(const ModelGraph& g, const CompressedState& state) {
    auto w = flatten_params(g);
    auto d = decompress_params(g, state);
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += (w[i] - d[i]) * (w[i] - d[i]);
    return acc;
}

std::size_t count_nonzero(const std::vector<double>& v) {
    std::size_t n = 0;
    for (double x : v) n += x != 0.0;
    return n;
}

bool states_equal(const ModelGraph& g, const CompressedState& a, const CompressedState& b) {
    return decompress_params(g, a) == decompress_params(g, b);
}

// minimum distance over all (n choose k) supports, optionally quantizing the
// surviving entries with the brute-force reference converter
double enumeration_minimum(const std::vector<double>& w, std::size_t k, bool quantized) {
    std::vector<double> q(w.size());
    if (quantized) {
        for (std::size_t i = 0; i < w.size(); ++i) q[i] = oracles::brute_force_half(w[i]);
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& support : oracles::subsets_of_size(w.size(), k)) {
        std::vector<bool> keep(w.size(), false);
        for (std::size_t i : support) keep[i] = true;
        double dist = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (keep[i]) {
                if (quantized) dist += (w[i] - q[i]) * (w[i] - q[i]);
            } else {
                dist += w[i] * w[i];
            }
        }
        best = std::min(best, dist);
    }
    return best;
}

// minimum distance over structure subsets: zeroing a structure costs the sum
// of its squared entries
double structure_enumeration_minimum(const std::vector<std::vector<double>>& structures,
                                     std::size_t k) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = structures.size();
    for (const auto& support : oracles::subsets_of_size(n, k)) {
        std::vector<bool> keep(n, false);
        for (std::size_t i : support) keep[i] = true;
        double dist = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (keep[i]) continue;
            for (double v : structures[i]) dist += v * v;
        }
        best = std::min(best, dist);
    }
    return best;
}

}  // namespace

TEST_CASE("magnitude threshold: forced ordering example") {
    std::vector<double> w = {0.1, -0.5, 0.3, -0.2};
    CHECK(magnitude_threshold(w, 0.5) == doctest::Approx(0.3));
    CHECK(magnitude_threshold(w, 0.0) == doctest::Approx(0.1));  // min magnitude, all survive
    CHECK_THROWS_AS(magnitude_threshold(w, 1.0), Error);
}

TEST_CASE("unstructured prune keeps exactly the top-k against a sort oracle") {
    auto rng = make_rng(77);
    std::vector<double> w(1000);
    for (double& v : w) v = normal(rng);
    ModelGraph g = chain_graph({100}, {dense_layer("d", 100, 10, false)});
    g.nodes[0].weights = Tensor({10, 100}, w);

    CompressedState state = project(g, Scheme::prune(), 0.9);
    auto d = decompress_params(g, state);
    CHECK(count_nonzero(d) == 100);

    // sort-based oracle: the survivors are the 100 largest magnitudes
    std::vector<double> mags(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) mags[i] = std::fabs(w[i]);
    std::sort(mags.begin(), mags.end());
    const double tau = mags[900];
    CHECK(magnitude_threshold(w, 0.9) == doctest::Approx(tau));
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (std::fabs(w[i]) > tau) CHECK(d[i] == w[i]);
        if (std::fabs(w[i]) < tau) CHECK(d[i] == 0.0);
    }
}

TEST_CASE("projection survivors for the 4-weight example") {
    ModelGraph g = chain_graph({4}, {dense_layer("d", 4, 1, false)});
    g.nodes[0].weights = Tensor({1, 4}, {0.1, -0.5, 0.3, -0.2});
    auto d = decompress_params(g, project(g, Scheme::prune(), 0.5));
    CHECK(d == std::vector<double>{0.0, -0.5, 0.3, 0.0});
}

TEST_CASE("unstructured projection: keep-1 equals the exhaustive oracle") {
    ModelGraph g = chain_graph({3}, {dense_layer("d", 3, 1, false)});
    g.nodes[0].weights = Tensor({1, 3}, {3.0, 1.0, -2.0});
    // keep k = 1 of 3
    CompressedState state = project(g, Scheme::prune(), 2.0 / 3.0);
    CHECK(decompress_params(g, state) == std::vector<double>{3.0, 0.0, 0.0});
    CHECK(projection_distance(g, state) ==
          doctest::Approx(enumeration_minimum({3.0, 1.0, -2.0}, 1, false)));
}

TEST_CASE("projection optimality over seeded instances (all pruning variants)") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        // unstructured on 8 weights, budgets 1..4
        ModelGraph g = single_dense(4, 2, seed);
        const auto w = flatten_params(g);
        for (std::size_t k = 1; k <= 4; ++k) {
            const double s = static_cast<double>(8 - k) / 8.0;
            CompressedState state = project(g, Scheme::prune(), s);
            CHECK(projection_distance(g, state) ==
                  doctest::Approx(enumeration_minimum(w, k, false)).epsilon(1e-12));
        }

        // neuron pruning on 6 rows, l2 scores make it the Euclidean projection
        ModelGraph gn = single_dense(3, 6, seed + 100);
        std::vector<std::vector<double>> rows;
        for (std::size_t r = 0; r < 6; ++r) {
            const double* base = gn.nodes[0].weights->data() + r * 3;
            rows.push_back({base[0], base[1], base[2]});
        }
        for (std::size_t k = 2; k <= 4; ++k) {
            const double s = static_cast<double>(6 - k) / 6.0;
            CompressedState state = project(gn, Scheme::neuron_prune(Criteria::L2Norm), s);
            CHECK(projection_distance(gn, state) ==
                  doctest::Approx(structure_enumeration_minimum(rows, k)).epsilon(1e-12));
        }
    }
}

TEST_CASE("filter prune retains the larger-norm filter") {
    ModelGraph g = chain_graph({1, 2, 2}, {conv2d_layer("c", 1, 2, 1, 2, 1, 0, false)});
    // filter 0 = [1,1] (norm sqrt(2)), filter 1 = [3,4] (norm 5)
    g.nodes[0].weights = Tensor({2, 1, 1, 2}, {1.0, 1.0, 3.0, 4.0});
    CompressedState state = project(g, Scheme::filter_prune(), 0.5);
    CHECK(decompress_params(g, state) == std::vector<double>{0.0, 0.0, 3.0, 4.0});
}

TEST_CASE("structured pruning never empties a layer") {
    ModelGraph g = single_dense(3, 4, 5);
    // 4 structures at s = 0.75 would keep 1; even extreme s keeps the floor
    CompressedState state = project(g, Scheme::neuron_prune(), 0.99);
    auto masks = structure_masks(g, state);
    std::size_t kept = 0;
    for (auto f : masks.keep.at(0)) kept += f;
    CHECK(kept == 1);
}

TEST_CASE("quantize: exact and known binary16 values") {
    CHECK(quantize_half(0.0) == 0.0);
    CHECK(quantize_half(1.0) == 1.0);
    CHECK(quantize_half(0.1) == 0.0999755859375);
}

TEST_CASE("binary16 conversion matches the brute-force reference") {
    auto rng = make_rng(2024);
    for (int i = 0; i < 200; ++i) {
        double x = std::ldexp(normal(rng), static_cast<int>(uniform_index(rng, 24)) - 12);
        CHECK(quantize_half(x) == oracles::brute_force_half(x));
    }
    // specials and boundaries
    for (double x : {65504.0, 65519.9, 65520.0, 2.0 * 65504.0, 6.10352e-05, 5.96046e-08,
                     2.98023e-08, 1e-12, -0.1, 0.5, 1.0 / 3.0}) {
        CHECK(quantize_half(x) == oracles::brute_force_half(x));
        CHECK(quantize_half(-x) == oracles::brute_force_half(-x));
    }
    CHECK(std::isinf(quantize_half(1e9)));
    CHECK(std::isnan(quantize_half(std::numeric_limits<double>::quiet_NaN())));
}

TEST_CASE("quantization relative error bound for normal-range values") {
    auto rng = make_rng(99);
    for (int i = 0; i < 500; ++i) {
        double x = std::ldexp(1.0 + uniform_real(rng, 0.0, 1.0),
                              static_cast<int>(uniform_index(rng, 28)) - 14);
        CHECK(std::fabs(quantize_half(x) - x) <= std::ldexp(std::fabs(x), -11));
    }
}

TEST_CASE("decompress: all-retained mask is the identity mapping") {
    ModelGraph g = single_dense(4, 2, 8);
    CompressedState state = project(g, Scheme::prune(), 0.0);
    CHECK(decompress_params(g, state) == flatten_params(g));
}

TEST_CASE("projection is idempotent under re-projection at the same sparsity") {
    ModelGraph g = single_dense(5, 4, 9, true);
    for (const Scheme& scheme :
         {Scheme::prune(), Scheme::neuron_prune(),
          Scheme::compose({Scheme::prune(), Scheme::quantize()})}) {
        CompressedState first = project(g, scheme, 0.5);
        ModelGraph reconstructed = decompress_model(g, first);
        CompressedState second = project(reconstructed, scheme, 0.5);
        CHECK(states_equal(g, first, second));
    }
}

TEST_CASE("quantize/dequantize round-trip is value-stable after the first pass") {
    ModelGraph g = single_dense(6, 3, 10, true);
    CompressedState once = project(g, Scheme::quantize(), 0.0);
    ModelGraph widened = decompress_model(g, once);
    CompressedState twice = project(widened, Scheme::quantize(), 0.0);
    CHECK(states_equal(g, once, twice));
}

TEST_CASE("compose: P+Q equals the exhaustive prune+quantize oracle") {
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        ModelGraph g = single_dense(4, 2, seed);
        const auto w = flatten_params(g);
        const Scheme pq = Scheme::compose({Scheme::prune(), Scheme::quantize()});
        for (std::size_t k = 2; k <= 4; k += 2) {
            const double s = static_cast<double>(8 - k) / 8.0;
            CompressedState state = project(g, pq, s);
            CHECK(projection_distance(g, state) ==
                  doctest::Approx(enumeration_minimum(w, k, true)).epsilon(1e-10));
        }
    }
}

TEST_CASE("compose of one scheme behaves like the scheme itself") {
    ModelGraph g = single_dense(4, 3, 11);
    CHECK(states_equal(g, project(g, Scheme::compose({Scheme::prune()}), 0.5),
                       project(g, Scheme::prune(), 0.5)));
}

TEST_CASE("compose flattens nested lists (associativity)") {
    ModelGraph g = single_dense(4, 3, 12, true);
    Scheme left = Scheme::compose(
        {Scheme::compose({Scheme::prune(), Scheme::neuron_prune()}), Scheme::quantize()});
    Scheme right = Scheme::compose(
        {Scheme::prune(), Scheme::compose({Scheme::neuron_prune(), Scheme::quantize()})});
    CHECK(left.children.size() == 3);
    CHECK(right.children.size() == 3);
    CHECK(states_equal(g, project(g, left, 0.5), project(g, right, 0.5)));
}

TEST_CASE("sparsity exactness up to the floor quantum") {
    auto rng = make_rng(2025);
    std::vector<double> w(1000);
    for (double& v : w) v = normal(rng);
    ModelGraph g = chain_graph({100}, {dense_layer("d", 100, 10, false)});
    g.nodes[0].weights = Tensor({10, 100}, w);
    for (double s : {0.1, 0.25, 0.333, 0.5, 0.7, 0.9, 0.99, 0.999}) {
        auto d = decompress_params(g, project(g, Scheme::prune(), s));
        const std::size_t expected = 1000 - static_cast<std::size_t>(std::floor(s * 1000 + 1e-9));
        CHECK(count_nonzero(d) == expected);
    }
}

TEST_CASE("structure_masks marks exactly the all-zero structures") {
    // filter pruning dropping filters 1 and 3 of 4
    ModelGraph g = chain_graph({2, 3, 3}, {conv2d_layer("c", 2, 4, 2, 2, 1, 0, false)});
    auto rng = make_rng(31);
    for (double& w : g.nodes[0].weights->values()) w = 1.0 + uniform_real(rng, 0.0, 1.0);
    // make filters 1, 3 the smallest
    for (std::size_t f : {1u, 3u}) {
        for (std::size_t i = 0; i < 8; ++i) (*g.nodes[0].weights)[f * 8 + i] = 0.01;
    }
    CompressedState state = project(g, Scheme::filter_prune(), 0.5);
    auto masks = structure_masks(g, state);
    CHECK(masks.keep.at(0) == std::vector<std::uint8_t>{1, 0, 1, 0});

    // no structure fully zero: identity mask
    CompressedState identity = project(g, Scheme::filter_prune(), 0.0);
    auto masks2 = structure_masks(g, identity);
    CHECK(masks2.keep.at(0) == std::vector<std::uint8_t>{1, 1, 1, 1});
}

TEST_CASE("structure_masks: neuron prune row mask is forced by definition") {
    ModelGraph g = chain_graph({4}, {dense_layer("d", 4, 3, false)});
    g.nodes[0].weights =
        Tensor({3, 4}, {1, 1, 1, 1, 2, 2, 2, 2, 0.1, 0.1, 0.1, 0.1});
    CompressedState state = project(g, Scheme::neuron_prune(Criteria::MeanAbs), 1.0 / 3.0);
    auto masks = structure_masks(g, state);
    CHECK(masks.keep.at(0) == std::vector<std::uint8_t>{1, 1, 0});
}

TEST_CASE("structure_masks rejects unstructured and quantize-only states") {
    ModelGraph g = single_dense(4, 2, 13);
    CHECK_THROWS_AS(structure_masks(g, project(g, Scheme::prune(), 0.5)), Error);
    CHECK_THROWS_AS(structure_masks(g, project(g, Scheme::quantize(), 0.0)), Error);
}

TEST_CASE("structured scheme errors when no layer matches") {
    ModelGraph g = single_dense(4, 2, 14);  // dense only
    CHECK_THROWS_AS(project(g, Scheme::filter_prune(), 0.5), Error);
}

TEST_CASE("block pruning scores ragged trailing blocks on their entries") {
    // 5 rows x 2 cols with 2x1 blocks: grid is 3x2 with a ragged last row
    ModelGraph g = chain_graph({2}, {dense_layer("d", 2, 5, false)});
    auto rng = make_rng(15);
    for (double& w : g.nodes[0].weights->values()) w = 1.0 + uniform_real(rng, 0.0, 1.0);
    // the ragged block (row 4, col 0) gets tiny values
    (*g.nodes[0].weights)[4 * 2 + 0] = 1e-4;
    Scheme scheme = Scheme::block_prune(Criteria::MeanAbs, {2, 1});
    CompressedState state = project(g, scheme, 1.0 / 6.0);  // zero exactly one block
    auto d = decompress_params(g, state);
    CHECK(d[4 * 2 + 0] == 0.0);
    CHECK(count_nonzero(d) == 9);
}

TEST_CASE("biases are never pruned, only quantized") {
    ModelGraph g = single_dense(6, 2, 16, true);
    CompressedState pruned = project(g, Scheme::prune(), 0.9);
    auto d = decompress_params(g, pruned);
    const auto w = flatten_params(g);
    for (std::size_t i = 12; i < 14; ++i) CHECK(d[i] == w[i]);  // bias block

    CompressedState pq = project(g, Scheme::compose({Scheme::prune(), Scheme::quantize()}), 0.9);
    auto dq = decompress_params(g, pq);
    for (std::size_t i = 12; i < 14; ++i) CHECK(dq[i] == quantize_half(w[i]));
}
