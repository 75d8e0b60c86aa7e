#include "taper/gp.hpp"

#include <cmath>

#include "taper/error.hpp"

namespace taper {

double matern52(double r, double length_scale) {
    if (r < 0.0) throw Error("matern52: distance must be >= 0");
    if (!(length_scale > 0.0)) throw Error("matern52: length scale must be > 0");
    const double z = std::sqrt(5.0) * r / length_scale;
    return (1.0 + z + z * z / 3.0) * std::exp(-z);
}

namespace {

// Lower Cholesky of a dense row-major SPD matrix. Returns false if a
// diagonal pivot is not strictly positive.
bool cholesky(std::vector<double>& a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (!(sum > 0.0)) return false;
                a[i * n + i] = std::sqrt(sum);
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
        for (std::size_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
    }
    return true;
}

void solve_lower(const std::vector<double>& L, std::size_t n, std::vector<double>& b) {
    for (std::size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) sum -= L[i * n + k] * b[k];
        b[i] = sum / L[i * n + i];
    }
}

void solve_upper_from_lower(const std::vector<double>& L, std::size_t n, std::vector<double>& b) {
    for (std::size_t i = n; i-- > 0;) {
        double sum = b[i];
        for (std::size_t k = i + 1; k < n; ++k) sum -= L[k * n + i] * b[k];
        b[i] = sum / L[i * n + i];
    }
}

}  // namespace

GpPosterior fit_gp(std::span<const double> X, std::span<const double> y,
                   const KernelConfig& kernel, double noise_variance) {
    if (X.empty() || X.size() != y.size()) throw Error("fit_gp: need matching nonempty X and y");
    if (!(kernel.signal_variance > 0.0)) throw Error("fit_gp: signal variance must be > 0");
    if (noise_variance < 0.0) throw Error("fit_gp: noise variance must be >= 0");

    GpPosterior post;
    post.X.assign(X.begin(), X.end());
    post.y_raw.assign(y.begin(), y.end());
    post.noise = noise_variance;
    post.kernel = kernel;

    const std::size_t n = X.size();
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    post.y_mean = mean;
    post.y_std = var > 1e-24 ? std::sqrt(var) : 1.0;  // constant targets: guard to 1

    std::vector<double> y_norm(n);
    for (std::size_t i = 0; i < n; ++i) y_norm[i] = (y[i] - mean) / post.y_std;

    double jitter = kernel.jitter;
    for (int attempt = 0;; ++attempt) {
        std::vector<double> gram(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double r = std::fabs(post.X[i] - post.X[j]);
                gram[i * n + j] = kernel.signal_variance * matern52(r, kernel.length_scale);
            }
            gram[i * n + i] += noise_variance + jitter;
        }
        if (cholesky(gram, n)) {
            post.chol = std::move(gram);
            break;
        }
        if (attempt >= 3) {
            throw Error("fit_gp: Cholesky factorization failed after jitter escalation");
        }
        jitter *= 10.0;
    }

    post.alpha_vec = y_norm;
    solve_lower(post.chol, n, post.alpha_vec);
    solve_upper_from_lower(post.chol, n, post.alpha_vec);
    return post;
}

GpPrediction gp_predict(const GpPosterior& posterior, double s) {
    if (posterior.empty()) {
        return GpPrediction{0.0, std::sqrt(posterior.kernel.signal_variance)};
    }
    const std::size_t n = posterior.size();
    std::vector<double> k_star(n);
    for (std::size_t i = 0; i < n; ++i) {
        k_star[i] = posterior.kernel.signal_variance *
                    matern52(std::fabs(s - posterior.X[i]), posterior.kernel.length_scale);
    }
    double mean_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_norm += k_star[i] * posterior.alpha_vec[i];

    std::vector<double> v = k_star;
    solve_lower(posterior.chol, n, v);
    double quad = 0.0;
    for (double vi : v) quad += vi * vi;
    double var_norm = posterior.kernel.signal_variance - quad;
    if (var_norm < 0.0) var_norm = 0.0;  // clamp before sqrt

    GpPrediction pred;
    pred.mean = mean_norm * posterior.y_std + posterior.y_mean;
    pred.stddev = std::sqrt(var_norm) * posterior.y_std;
    return pred;
}

}  // namespace taper
