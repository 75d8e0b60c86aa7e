#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "taper/error.hpp"
#include "taper/gp.hpp"

namespace taper {

// --- acquisition scores ---

/// Domain-restricted UCB: (1 - gamma) * sigma - gamma * |mu - level|.
double dr_ucb_score(double mu, double sigma, double level, double gamma);
double ucb_score(double mu, double sigma, double kappa);
double lcb_score(double mu, double sigma, double kappa);

struct LevelSetConfig {
    double epsilon = 0.02;   // accuracy-drop tolerance; level = baseline - epsilon
    double gamma = 0.95;     // DR-UCB trade-off
    std::size_t max_evals = 10;  // T, per stage
    std::size_t grid_size = 1024;
    double kappa = 2.576;    // UCB/LCB confidence multiplier (99% quantile)
    double noise = 0.1;      // GP observation-noise variance alpha
    KernelConfig kernel;
    std::uint64_t seed = 0;  // recorded in traces; the search itself is deterministic

    void validate() const;
};

struct SearchSample {
    int stage = 1;
    std::size_t t = 0;      // 1-based within the stage
    double s = 0.0;
    double y = 0.0;
    double domain_lo = 0.0;
    double acq = 0.0;       // NaN for seed / boundary-policy evaluations
    bool feasible = false;  // y >= level (stage 1); always true in stage 2
};

/// Raised when stage 1 exhausts its budget without one feasible sample.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& message, std::vector<SearchSample> trace)
        : Error(message), trace_(std::move(trace)) {}
    const std::vector<SearchSample>& trace() const { return trace_; }

private:
    std::vector<SearchSample> trace_;
};

/// Search ledger: observations, the restricted domain, and the fitted GP.
struct SearchState {
    std::vector<std::pair<double, double>> samples;  // (s, y) in evaluation order
    double domain_lo = 0.0;   // max feasible s so far (stage 1)
    double domain_hi = 1.0;
    bool domain_hi_inclusive = false;  // stage 1 is open at 1; stage 2 includes s_acc
    double s_acc = -1.0;      // best proven-feasible sparsity, < 0 if none
    GpPosterior posterior;
    std::vector<SearchSample> trace;
    std::set<long long> evaluated_keys;  // grid-resolution dedup
};

/// Memoizing wrapper around an expensive evaluation, keyed by s rounded to
/// the acquisition grid resolution.
class BlackBox {
public:
    BlackBox(std::function<double(double)> fn, std::size_t grid_size)
        : fn_(std::move(fn)), grid_size_(grid_size) {}

    double operator()(double s);
    std::size_t calls() const { return calls_; }
    std::size_t unique_evaluations() const { return cache_.size(); }
    long long key(double s) const;

private:
    std::function<double(double)> fn_;
    std::size_t grid_size_;
    std::map<long long, double> cache_;
    std::size_t calls_ = 0;
};

/// Argmax of `score(mu, sigma)` over a uniform grid of grid_size points on
/// the half-open domain (lo, hi], skipping grid points already evaluated.
/// Ties resolve to the lowest s. Throws when every grid point is spent.
double next_sample(const SearchState& state, const std::function<double(double, double)>& score,
                   const LevelSetConfig& cfg, double* acq_value = nullptr);

struct Stage1Result {
    double s_acc = 0.0;
    SearchState state;
};

/// Level-set search: two spread seed evaluations, then DR-UCB proposals.
/// Every feasible sample raises the domain floor (skipped when
/// restrict_domain is false, which is plain ILS-UCB). Returns the largest
/// proven-feasible sparsity.
Stage1Result stage1_level_set(BlackBox& blackbox, double baseline_accuracy,
                              const LevelSetConfig& cfg, bool restrict_domain = true);

enum class Direction { Maximize, Minimize };

struct Stage2Result {
    double s_star = 0.0;
    double objective = 0.0;
    SearchState state;
};

/// Objective optimization on (0, s_acc] with UCB (max) or LCB (min). The
/// final budgeted evaluation is spent on s_acc if still unseen, so boundary
/// optima are always observed. Returns the best evaluated point (ties:
/// earliest).
Stage2Result stage2_optimize(BlackBox& blackbox, double s_acc, Direction direction,
                             const LevelSetConfig& cfg);

}  // namespace taper
