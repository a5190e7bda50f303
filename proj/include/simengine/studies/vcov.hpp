#pragma once

// Standard errors of least-squares coefficients under heteroskedastic
// noise: model-based, sandwich (HC0) and bootstrap.

#include <cmath>
#include <string>
#include <vector>

#include "simengine/context.hpp"
#include "simengine/levels.hpp"
#include "simengine/stats.hpp"
#include "simengine/summarize.hpp"

namespace simengine::studies::vcov {

inline constexpr double kBeta0 = -1.0, kBeta1 = 10.0;
inline constexpr std::uint64_t kSeed = 24;

struct RegressionDataset {
    std::vector<double> x;
    std::vector<double> y;
};

/// x ~ N(0, 1), y = beta0 + beta1 x + e with Var(e | x) = exp(x).
inline RegressionDataset create_regression_data(RngStream& rng, std::size_t n) {
    RegressionDataset d;
    d.x = rng.normal(n);
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.y[i] = rng.normal(kBeta0 + kBeta1 * d.x[i], std::sqrt(std::exp(d.x[i])));
    return d;
}

struct Estimates {
    double b0, b1, v0, v1;  // coefficients and their variance estimates
};

inline Estimates estimate(const std::string& method, const RegressionDataset& d, RngStream& rng) {
    const auto fit = stats::ols_fit(d.x, d.y);
    if (method == "model_vcov") {
        const auto v = stats::vcov_model(fit);
        return {fit.b0, fit.b1, v(0, 0), v(1, 1)};
    }
    if (method == "sandwich_vcov") {
        const auto v = stats::vcov_sandwich_hc0(fit);
        return {fit.b0, fit.b1, v(0, 0), v(1, 1)};
    }
    if (method == "bootstrap_vcov") {
        const auto [v0, v1] = stats::vcov_bootstrap(d.x, d.y, rng, 100);
        return {fit.b0, fit.b1, v0, v1};
    }
    throw ScriptError("unknown estimator '" + method + "'", "estimate(method, data)");
}

inline LevelSchema levels(std::vector<LevelValue> n = {50, 100, 500, 1000}) {
    LevelSchema s;
    s.add("estimator", {"model_vcov", "sandwich_vcov"}).add("n", std::move(n));
    return s;
}

inline LevelSchema levels_with_bootstrap(std::vector<LevelValue> n = {50, 100, 500, 1000}) {
    LevelSchema s;
    s.add("estimator", {"model_vcov", "sandwich_vcov", "bootstrap_vcov"}).add("n", std::move(n));
    return s;
}

inline SimConfig config(std::uint64_t num_sim = 500, std::uint64_t seed = kSeed) {
    SimConfig c;
    c.num_sim = num_sim;
    c.seed = seed;
    return c;
}

inline Script script() {
    return [](ScriptContext& ctx) {
        const auto n = static_cast<std::size_t>(ctx.levels().integer("n"));
        const auto data = create_regression_data(ctx.rng(), n);
        const auto e = estimate(ctx.levels().text("estimator"), data, ctx.rng());
        return ReplicateOutput{{"beta0_est", e.b0},
                               {"beta1_est", e.b1},
                               {"beta0_se_est", std::sqrt(e.v0)},
                               {"beta1_se_est", std::sqrt(e.v1)}};
    };
}

inline std::vector<SummarySpec> summary_specs() {
    return {SummarySpec::mean("mean_se_beta0", "beta0_se_est"), SummarySpec::mean("mean_se_beta1", "beta1_se_est"),
            SummarySpec::coverage("cov_beta0", "beta0_est", "beta0_se_est", kBeta0),
            SummarySpec::coverage("cov_beta1", "beta1_est", "beta1_se_est", kBeta1)};
}

}  // namespace simengine::studies::vcov
