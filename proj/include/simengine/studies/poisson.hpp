#pragma once

// Estimating a Poisson rate with the sample mean ("M") or the sample
// variance ("V") at three sample sizes.

#include <vector>

#include "simengine/context.hpp"
#include "simengine/levels.hpp"
#include "simengine/summarize.hpp"

namespace simengine::studies::poisson {

inline constexpr double kLambda = 20.0;
inline constexpr std::uint64_t kSeed = 287577520;

inline LevelSchema levels() {
    LevelSchema s;
    s.add("estimator", {"M", "V"}).add("n", {10, 100, 1000});
    return s;
}

/// The update step: n gains 10000.
inline LevelSchema updated_levels() {
    LevelSchema s;
    s.add("estimator", {"M", "V"}).add("n", {10, 100, 1000, 10000});
    return s;
}

inline SimConfig config(std::uint64_t num_sim = 100, std::uint64_t seed = kSeed) {
    SimConfig c;
    c.num_sim = num_sim;
    c.seed = seed;
    return c;
}

inline double estimate(const std::vector<std::int64_t>& data, const std::string& type) {
    double mean = 0.0;
    for (auto x : data) mean += static_cast<double>(x);
    mean /= static_cast<double>(data.size());
    if (type == "M") return mean;
    if (type == "V") {
        double ss = 0.0;
        for (auto x : data) ss += (static_cast<double>(x) - mean) * (static_cast<double>(x) - mean);
        return ss / static_cast<double>(data.size() - 1);
    }
    throw ScriptError("unknown estimator '" + type + "'", "estimate(data, type)");
}

inline Script script() {
    return [](ScriptContext& ctx) {
        const auto n = static_cast<std::size_t>(ctx.levels().integer("n"));
        const auto data = ctx.rng().poisson(n, kLambda);
        return ReplicateOutput{{"lambda_hat", estimate(data, ctx.levels().text("estimator"))}};
    };
}

inline std::vector<SummarySpec> summary_specs() {
    return {SummarySpec::bias("bias_lambda", "lambda_hat", kLambda), SummarySpec::mse("mse_lambda", "lambda_hat", kLambda)};
}

}  // namespace simengine::studies::poisson
