// Simulation-based power of a two-arm trial analysed with Welch's t test,
// next to the normal-approximation power formula.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "simengine/simengine.hpp"
#include "simengine/studies/power.hpp"

using namespace simengine;
namespace power = simengine::studies::power;

int main(int argc, char** argv) {
    CLI::App app{"Power study for a two-arm trial"};
    std::uint64_t seed = power::kSeed, num_sim = 1000;
    std::string dir = ".", out, csv, js = "slurm", tid_var;
    app.add_option("--seed", seed, "Global seed");
    app.add_option("--num-sim", num_sim, "Replicates per sample size");
    app.add_option("--dir", dir, "Job-array working directory");
    app.add_option("--js", js, "Scheduler code");
    app.add_option("--tid-var", tid_var, "Task id variable (overrides --js)");
    app.add_option("--out", out, "Save the finished simulation to this archive");
    app.add_option("--csv", csv, "Write simulated and formula power as CSV to this file");
    CLI11_PARSE(app, argc, argv);

    ClusterConfig cfg;
    cfg.js = js;
    cfg.tid_var = tid_var;
    cfg.dir = dir;

    ClusterBlocks blocks;
    blocks.first = [&] {
        Simulation sim;
        sim.set_levels(power::levels());
        sim.set_config(power::config(num_sim, seed));
        return sim;
    };
    blocks.last = [&](Simulation& sim) {
        auto summary = summarize(sim.state(), power::summary_specs(), true);
        const auto n_col = *summary.index("n");
        summary.columns.push_back("formula_power");
        for (auto& row : summary.rows) row.emplace_back(power::formula_power(*row[n_col].to_number()));
        if (!csv.empty()) {
            std::ofstream(csv) << render_csv(summary);
        } else {
            std::cout << render_text(summary);
        }
        if (!out.empty()) sim.save(out);
    };

    try {
        run_on_cluster(power::script(), blocks, cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
