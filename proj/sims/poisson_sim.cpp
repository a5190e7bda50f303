// Rate of a Poisson distribution estimated by the sample mean and the
// sample variance. Runs locally, or as a job array when sim_run is set.
//
//   poisson_sim                       local run, summary on stdout
//   sim_run=first poisson_sim --js slurm --dir work   (then main, last)

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "simengine/simengine.hpp"
#include "simengine/studies/poisson.hpp"

using namespace simengine;
namespace poisson = simengine::studies::poisson;

int main(int argc, char** argv) {
    CLI::App app{"Poisson rate estimation study"};
    std::uint64_t seed = poisson::kSeed, num_sim = 100;
    std::string dir = ".", out, csv, js = "slurm", tid_var;
    bool update = false;
    app.add_option("--seed", seed, "Global seed");
    app.add_option("--num-sim", num_sim, "Replicates per level combination");
    app.add_option("--dir", dir, "Job-array working directory");
    app.add_option("--js", js, "Scheduler code");
    app.add_option("--tid-var", tid_var, "Task id variable (overrides --js)");
    app.add_option("--out", out, "Save the finished simulation to this archive");
    app.add_option("--csv", csv, "Write the summary as CSV to this file");
    app.add_flag("--update", update,
                 "Update the simulation in --dir (n gains 10000, num_sim doubles) instead of starting over");
    CLI11_PARSE(app, argc, argv);

    ClusterConfig cfg;
    cfg.js = js;
    cfg.tid_var = tid_var;
    cfg.dir = dir;

    ClusterBlocks blocks;
    if (update) {
        blocks.first = [&] {
            auto sim = Simulation::load(cfg.state_path());
            sim.set_levels(poisson::updated_levels());
            sim.config().num_sim = 2 * sim.config().num_sim;
            return sim;
        };
    } else {
        blocks.first = [&] {
            Simulation sim;
            sim.set_levels(poisson::levels());
            sim.set_config(poisson::config(num_sim, seed));
            return sim;
        };
    }
    blocks.last = [&](Simulation& sim) {
        const auto summary = summarize(sim.state(), poisson::summary_specs(), true);
        if (!csv.empty()) {
            std::ofstream(csv) << render_csv(summary);
        } else {
            std::cout << render_text(summary);
        }
        if (!out.empty()) sim.save(out);
    };

    try {
        if (update) {
            update_sim_on_cluster(poisson::script(), blocks, cfg);
        } else {
            run_on_cluster(poisson::script(), blocks, cfg);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
