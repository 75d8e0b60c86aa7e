#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "taper/error.hpp"
#include "taper/gp.hpp"
#include "taper/rng.hpp"

using namespace taper;

TEST_CASE("matern52 closed form") {
    CHECK(matern52(0.0, 1.0) == 1.0);
    const double sqrt5 = std::sqrt(5.0);
    const double expected = (1.0 + sqrt5 + 5.0 / 3.0) * std::exp(-sqrt5);
    CHECK(matern52(1.0, 1.0) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(matern52(1.0, 1.0) == doctest::Approx(0.52399).epsilon(1e-4));
    // monotone decreasing toward zero
    double prev = 1.0;
    for (double r = 0.25; r <= 40.0; r += 0.25) {
        double k = matern52(r, 1.0);
        CHECK(k < prev);
        prev = k;
    }
    CHECK(prev < 1e-30);
    CHECK_THROWS_AS(matern52(-0.1, 1.0), Error);
}

TEST_CASE("constant targets: guarded normalization predicts the constant") {
    std::vector<double> X = {0.1, 0.5, 0.9};
    std::vector<double> y = {0.42, 0.42, 0.42};
    GpPosterior post = fit_gp(X, y);
    CHECK(post.y_std == 1.0);
    for (double s : {0.0, 0.3, 0.77, 1.0}) {
        CHECK(gp_predict(post, s).mean == doctest::Approx(0.42).epsilon(1e-12));
    }
}

TEST_CASE("duplicate inputs fit fine with observation noise") {
    std::vector<double> X = {0.5, 0.5, 0.5};
    std::vector<double> y = {0.1, 0.2, 0.3};
    GpPosterior post = fit_gp(X, y, {}, 0.1);
    CHECK(std::isfinite(gp_predict(post, 0.5).mean));
}

TEST_CASE("cholesky failure after jitter escalation raises an error") {
    std::vector<double> X = {0.5, 0.5};
    std::vector<double> y = {0.0, 1.0};
    KernelConfig kernel;
    kernel.jitter = 0.0;  // escalation multiplies zero, so it cannot recover
    CHECK_THROWS_AS(fit_gp(X, y, kernel, 0.0), Error);
}

TEST_CASE("posterior matches the naive explicit-inverse oracle") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto rng = make_rng(seed);
        std::vector<double> X(5), y(5);
        for (std::size_t i = 0; i < 5; ++i) {
            X[i] = uniform_real(rng, 0.0, 1.0);
            y[i] = uniform_real(rng, 0.3, 0.95);
        }
        GpPosterior post = fit_gp(X, y, {}, 0.1);
        auto naive = oracles::naive_gp_fit(X, y, 0.1);
        for (int k = 0; k <= 10; ++k) {
            const double s = static_cast<double>(k) / 10.0;
            GpPrediction got = gp_predict(post, s);
            auto [mu, sigma] = oracles::naive_gp_predict(naive, s);
            CHECK(std::fabs(got.mean - mu) <= 1e-10);
            CHECK(std::fabs(got.stddev - sigma) <= 1e-10);
        }
    }
}

TEST_CASE("interpolation at a noiseless observation") {
    std::vector<double> X = {0.2, 0.5, 0.8};
    std::vector<double> y = {0.9, 0.6, 0.2};
    GpPosterior post = fit_gp(X, y, {}, 0.0);  // jitter only
    for (std::size_t i = 0; i < X.size(); ++i) {
        GpPrediction p = gp_predict(post, X[i]);
        CHECK(std::fabs(p.mean - y[i]) <= 1e-6);
        CHECK(p.stddev <= 1e-3);
    }
}

TEST_CASE("prior reversion far from the data") {
    std::vector<double> X = {0.48, 0.5, 0.52};
    std::vector<double> y = {0.8, 0.7, 0.6};
    KernelConfig kernel;
    kernel.length_scale = 0.01;  // data becomes irrelevant a few steps away
    GpPosterior post = fit_gp(X, y, kernel, 0.1);
    GpPrediction p = gp_predict(post, 0.99);
    CHECK(p.mean == doctest::Approx(post.y_mean).epsilon(1e-6));
    CHECK(p.stddev == doctest::Approx(post.y_std).epsilon(1e-6));
}

TEST_CASE("symmetric data gives symmetric predictions") {
    std::vector<double> X = {0.2, 0.4, 0.6, 0.8};
    std::vector<double> y = {0.3, 0.9, 0.9, 0.3};
    GpPosterior post = fit_gp(X, y, {}, 0.05);
    for (double d : {0.05, 0.17, 0.31}) {
        GpPrediction left = gp_predict(post, 0.5 - d);
        GpPrediction right = gp_predict(post, 0.5 + d);
        CHECK(std::fabs(left.mean - right.mean) <= 1e-9);
        CHECK(std::fabs(left.stddev - right.stddev) <= 1e-9);
    }
}

TEST_CASE("sigma grows with distance from observations") {
    auto rng = make_rng(12);
    std::vector<double> X = {0.3, 0.7};
    std::vector<double> y = {uniform_real(rng, 0.0, 1.0), uniform_real(rng, 0.0, 1.0)};
    KernelConfig kernel;
    kernel.length_scale = 0.1;
    GpPosterior post = fit_gp(X, y, kernel, 1e-4);
    const double at_data = gp_predict(post, 0.3).stddev;
    const double midpoint = gp_predict(post, 0.5).stddev;
    const double prior = post.y_std * std::sqrt(kernel.signal_variance);
    CHECK(at_data <= midpoint);
    CHECK(midpoint <= prior + 1e-12);
}

TEST_CASE("target affine equivariance") {
    auto rng = make_rng(33);
    std::vector<double> X(6), y(6);
    for (std::size_t i = 0; i < 6; ++i) {
        X[i] = uniform_real(rng, 0.0, 1.0);
        y[i] = uniform_real(rng, -1.0, 1.0);
    }
    const double c = -2.5, b = 0.7;
    std::vector<double> scaled(6);
    for (std::size_t i = 0; i < 6; ++i) scaled[i] = y[i] * c + b;
    GpPosterior base = fit_gp(X, y, {}, 0.1);
    GpPosterior transformed = fit_gp(X, scaled, {}, 0.1);
    for (double s : {0.0, 0.21, 0.5, 0.84, 1.0}) {
        GpPrediction p0 = gp_predict(base, s);
        GpPrediction p1 = gp_predict(transformed, s);
        CHECK(std::fabs(p1.mean - (p0.mean * c + b)) <= 1e-9);
        CHECK(std::fabs(p1.stddev - p0.stddev * std::fabs(c)) <= 1e-9);
    }
}

TEST_CASE("empty posterior returns the prior") {
    GpPosterior post;
    GpPrediction p = gp_predict(post, 0.4);
    CHECK(p.mean == 0.0);
    CHECK(p.stddev == 1.0);
}
