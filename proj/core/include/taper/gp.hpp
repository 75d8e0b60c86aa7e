#pragma once

#include <span>
#include <vector>

namespace taper {

struct KernelConfig {
    double length_scale = 1.0;
    double signal_variance = 1.0;
    double jitter = 1e-6;  // numerical, separate from the observation noise
};

/// Matern nu=5/2 covariance at distance r with unit signal variance:
/// (1 + sqrt(5) r / l + 5 r^2 / (3 l^2)) exp(-sqrt(5) r / l)
double matern52(double r, double length_scale);

/// Fitted GP over 1-D inputs. Targets are z-scored before the solve and
/// predictions are mapped back, so the regressor is affine-equivariant in y.
struct GpPosterior {
    std::vector<double> X;
    std::vector<double> y_raw;
    double y_mean = 0.0;
    double y_std = 1.0;
    double noise = 0.1;  // observation-noise variance alpha
    KernelConfig kernel;
    std::vector<double> chol;   // lower Cholesky factor of K + (alpha+jitter) I
    std::vector<double> alpha_vec;  // (K + (alpha+jitter) I)^-1 y_norm

    bool empty() const { return X.empty(); }
    std::size_t size() const { return X.size(); }
};

/// Full refit from scratch. Escalates jitter up to three times (x10) if the
/// Cholesky factorization fails, then errors.
GpPosterior fit_gp(std::span<const double> X, std::span<const double> y,
                   const KernelConfig& kernel = {}, double noise_variance = 0.1);

struct GpPrediction {
    double mean = 0.0;
    double stddev = 0.0;
};

/// Predictive mean and standard deviation of the latent function at s.
/// An empty posterior returns the prior (0, sqrt(signal_variance)).
GpPrediction gp_predict(const GpPosterior& posterior, double s);

}  // namespace taper
