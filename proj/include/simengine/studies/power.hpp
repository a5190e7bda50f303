#pragma once

// Simulation-based power of Welch's two-sample t test for a two-arm trial
// (means 17 and 18, SD 2), compared against the normal-approximation
// formula.

#include <vector>

#include "simengine/context.hpp"
#include "simengine/levels.hpp"
#include "simengine/stats.hpp"
#include "simengine/summarize.hpp"

namespace simengine::studies::power {

inline constexpr double kMu0 = 17.0, kMu1 = 18.0, kSigma0 = 2.0, kSigma1 = 2.0;
inline constexpr std::uint64_t kSeed = 24;

struct RctDataset {
    std::vector<int> group;
    std::vector<double> outcome;
};

/// 2n rows with a random arrangement of n zeros and n ones. Each arm draws
/// only n normals which are reused cyclically over the 2n rows: row i takes
/// draw i mod n of its arm. That is what the usual vectorized one-liner
/// does, and it makes treated and control outcomes share draws, which lowers
/// the power somewhat against fully independent data.
inline RctDataset create_rct_data(RngStream& rng, std::size_t n, double mu0, double mu1, double s0, double s1) {
    RctDataset d;
    d.group.resize(2 * n);
    for (std::size_t i = 0; i < 2 * n; ++i) d.group[i] = static_cast<int>(i % 2);
    rng.shuffle(std::span<int>(d.group));
    const auto y0 = rng.normal(n, mu0, s0);
    const auto y1 = rng.normal(n, mu1, s1);
    d.outcome.resize(2 * n);
    for (std::size_t i = 0; i < 2 * n; ++i) d.outcome[i] = d.group[i] ? y1[i % n] : y0[i % n];
    return d;
}

inline int run_test(const RctDataset& d, double alpha = 0.05) {
    std::vector<double> g0, g1;
    for (std::size_t i = 0; i < d.group.size(); ++i) (d.group[i] ? g1 : g0).push_back(d.outcome[i]);
    return stats::reject_at(stats::welch_t_test(g0, g1).p_value, alpha);
}

inline LevelSchema levels() {
    LevelSchema s;
    s.add("n", {20, 40, 60, 80});
    return s;
}

inline SimConfig config(std::uint64_t num_sim = 1000, std::uint64_t seed = kSeed) {
    SimConfig c;
    c.num_sim = num_sim;
    c.seed = seed;
    return c;
}

inline Script script() {
    return [](ScriptContext& ctx) {
        const auto n = static_cast<std::size_t>(ctx.levels().integer("n"));
        const auto data = create_rct_data(ctx.rng(), n, kMu0, kMu1, kSigma0, kSigma1);
        return ReplicateOutput{{"reject", run_test(data)}};
    };
}

inline std::vector<SummarySpec> summary_specs() { return {SummarySpec::mean("power", "reject")}; }

inline double formula_power(double n) { return stats::power_formula(n, kMu0, kMu1, kSigma0, kSigma1, 0.05); }

}  // namespace simengine::studies::power
