#include "taper/search.hpp"

#include <cmath>
#include <limits>

namespace taper {

double dr_ucb_score(double mu, double sigma, double level, double gamma) {
    return (1.0 - gamma) * sigma - gamma * std::fabs(mu - level);
}

double ucb_score(double mu, double sigma, double kappa) { return mu + kappa * sigma; }

double lcb_score(double mu, double sigma, double kappa) { return mu - kappa * sigma; }

void LevelSetConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (max_evals < 2) throw ConfigError("max_evals must be >= 2");
    if (grid_size < 2) throw ConfigError("grid_size must be >= 2");
    if (kappa < 0.0) throw ConfigError("kappa must be >= 0");
    if (noise < 0.0) throw ConfigError("noise must be >= 0");
}

long long BlackBox::key(double s) const {
    return std::llround(s * static_cast<double>(grid_size_));
}

double BlackBox::operator()(double s) {
    ++calls_;
    const long long k = key(s);
    auto it = cache_.find(k);
    if (it != cache_.end()) return it->second;
    const double y = fn_(s);
    cache_.emplace(k, y);
    return y;
}

double next_sample(const SearchState& state, const std::function<double(double, double)>& score,
                   const LevelSetConfig& cfg, double* acq_value) {
    const double lo = state.domain_lo;
    const double hi = state.domain_hi;
    if (!(hi > lo)) throw Error("next_sample: empty domain");

    bool found = false;
    double best_s = 0.0;
    double best_score = -std::numeric_limits<double>::infinity();
    const double step = (hi - lo) / static_cast<double>(cfg.grid_size);
    for (std::size_t i = 0; i < cfg.grid_size; ++i) {
        const double s = lo + static_cast<double>(i + 1) * step;  // (lo, hi]
        const long long k = std::llround(s * static_cast<double>(cfg.grid_size));
        if (state.evaluated_keys.count(k)) continue;
        const GpPrediction p = gp_predict(state.posterior, s);
        const double value = score(p.mean, p.stddev);
        if (!found || value > best_score) {  // strict: ties keep the lowest s
            found = true;
            best_score = value;
            best_s = s;
        }
    }
    if (!found) throw Error("domain exhausted");
    if (acq_value) *acq_value = best_score;
    return best_s;
}

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void record_evaluation(SearchState& state, BlackBox& blackbox, int stage, std::size_t t, double s,
                       double y, double acq, bool feasible) {
    state.samples.emplace_back(s, y);
    state.evaluated_keys.insert(blackbox.key(s));
    SearchSample row;
    row.stage = stage;
    row.t = t;
    row.s = s;
    row.y = y;
    row.domain_lo = state.domain_lo;
    row.acq = acq;
    row.feasible = feasible;
    state.trace.push_back(row);
}

void refit(SearchState& state, const LevelSetConfig& cfg) {
    std::vector<double> xs, ys;
    xs.reserve(state.samples.size());
    ys.reserve(state.samples.size());
    for (const auto& [s, y] : state.samples) {
        xs.push_back(s);
        ys.push_back(y);
    }
    state.posterior = fit_gp(xs, ys, cfg.kernel, cfg.noise);
}

}  // namespace

Stage1Result stage1_level_set(BlackBox& blackbox, double baseline_accuracy,
                              const LevelSetConfig& cfg, bool restrict_domain) {
    cfg.validate();
    const double level = baseline_accuracy - cfg.epsilon;

    SearchState state;
    state.domain_lo = 0.0;
    state.domain_hi = 1.0;

    auto evaluate = [&](std::size_t t, double s, double acq) {
        const double y = blackbox(s);
        const bool feasible = y >= level;
        record_evaluation(state, blackbox, 1, t, s, y, acq, feasible);
        if (feasible && s > state.s_acc) {
            state.s_acc = s;
            if (restrict_domain) state.domain_lo = s;  // D <- (s_t, 1)
        }
    };

    // two spread seed points keep the first GP fit non-degenerate
    std::size_t t = 0;
    evaluate(++t, 0.25 * state.domain_hi, kNan);
    evaluate(++t, 0.75 * state.domain_hi, kNan);

    while (t < cfg.max_evals) {
        refit(state, cfg);
        double acq = kNan;
        double s = 0.0;
        try {
            s = next_sample(
                state,
                [&](double mu, double sigma) { return dr_ucb_score(mu, sigma, level, cfg.gamma); },
                cfg, &acq);
        } catch (const Error&) {
            break;  // grid spent; keep what we have
        }
        evaluate(++t, s, acq);
    }
    refit(state, cfg);

    if (state.s_acc < 0.0) {
        throw InfeasibleError("stage 1 found no feasible sparsity within " +
                                  std::to_string(cfg.max_evals) + " evaluations",
                              state.trace);
    }
    return Stage1Result{state.s_acc, std::move(state)};
}

Stage2Result stage2_optimize(BlackBox& blackbox, double s_acc, Direction direction,
                             const LevelSetConfig& cfg) {
    cfg.validate();
    if (!(s_acc > 0.0)) throw Error("stage2_optimize: s_acc must be > 0");

    SearchState state;
    state.domain_lo = 0.0;
    state.domain_hi = s_acc;

    // best observed objective, ties to the earliest evaluation
    double best_s = 0.0;
    double best_y = 0.0;
    bool have_best = false;
    auto better = [&](double y) {
        return direction == Direction::Maximize ? y > best_y : y < best_y;
    };
    auto evaluate = [&](std::size_t t, double s, double acq) {
        const double y = blackbox(s);
        record_evaluation(state, blackbox, 2, t, s, y, acq, true);
        if (!have_best || better(y)) {
            have_best = true;
            best_s = s;
            best_y = y;
        }
    };

    std::size_t t = 0;
    evaluate(++t, 0.25 * s_acc, kNan);
    if (t < cfg.max_evals) evaluate(++t, 0.75 * s_acc, kNan);

    const auto score = [&](double mu, double sigma) {
        return direction == Direction::Maximize ? ucb_score(mu, sigma, cfg.kappa)
                                                : -lcb_score(mu, sigma, cfg.kappa);
    };
    while (t + 1 < cfg.max_evals) {
        refit(state, cfg);
        double acq = kNan;
        double s = 0.0;
        try {
            s = next_sample(state, score, cfg, &acq);
        } catch (const Error&) {
            break;
        }
        evaluate(++t, s, acq);
    }

    // boundary policy: objective curves like footprint peak at s_acc
    if (t < cfg.max_evals) {
        if (!state.evaluated_keys.count(blackbox.key(s_acc))) {
            evaluate(++t, s_acc, kNan);
        } else {
            refit(state, cfg);
            try {
                double acq = kNan;
                double s = next_sample(state, score, cfg, &acq);
                evaluate(++t, s, acq);
            } catch (const Error&) {
                // grid spent
            }
        }
    }
    refit(state, cfg);
    return Stage2Result{best_s, best_y, std::move(state)};
}

}  // namespace taper
