// Coverage of confidence intervals for regression coefficients with
// model-based and sandwich standard errors, then an update that adds the
// bootstrap estimator without rerunning the first two.
//
// Locally both steps run back to back. On a cluster, submit the three
// phases with --stage run, then again with --stage update.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "simengine/simengine.hpp"
#include "simengine/studies/vcov.hpp"

using namespace simengine;
namespace vcov = simengine::studies::vcov;

int main(int argc, char** argv) {
    CLI::App app{"Standard error estimators under heteroskedasticity"};
    std::uint64_t seed = vcov::kSeed, num_sim = 500;
    std::string dir = ".", out, csv, js = "slurm", tid_var, stage = "all";
    app.add_option("--seed", seed, "Global seed");
    app.add_option("--num-sim", num_sim, "Replicates per level combination");
    app.add_option("--stage", stage, "all (local only), run or update")
        ->check(CLI::IsMember({"all", "run", "update"}));
    app.add_option("--dir", dir, "Job-array working directory");
    app.add_option("--js", js, "Scheduler code");
    app.add_option("--tid-var", tid_var, "Task id variable (overrides --js)");
    app.add_option("--out", out, "Save the finished simulation to this archive");
    app.add_option("--csv", csv, "Write the summary as CSV to this file");
    CLI11_PARSE(app, argc, argv);

    ClusterConfig cfg;
    cfg.js = js;
    cfg.tid_var = tid_var;
    cfg.dir = dir;

    auto report = [&](Simulation& sim) {
        const auto summary = summarize(sim.state(), vcov::summary_specs(), false);
        if (!csv.empty()) {
            std::ofstream(csv) << render_csv(summary);
        } else {
            std::cout << render_text(summary);
        }
        if (!out.empty()) sim.save(out);
    };
    auto fresh = [&] {
        Simulation sim;
        sim.set_levels(vcov::levels());
        sim.set_config(vcov::config(num_sim, seed));
        return sim;
    };
    auto add_bootstrap = [](Simulation& sim) {
        sim.set_levels(vcov::levels_with_bootstrap());
        sim.config().parallel = true;
        sim.config().n_workers = 2;
    };

    try {
        if (stage == "all") {
            if (detect_phase(process_environment()) != Phase::local) {
                std::cerr << "error: --stage all only runs locally; use --stage run, then --stage update\n";
                return 1;
            }
            Simulation sim = fresh();
            sim.set_script(vcov::script());
            sim.run();
            add_bootstrap(sim);
            sim.update();
            report(sim);
        } else if (stage == "run") {
            run_on_cluster(vcov::script(), {fresh, {}, report}, cfg);
        } else {
            ClusterBlocks blocks;
            blocks.first = [&] {
                auto sim = Simulation::load(cfg.state_path());
                add_bootstrap(sim);
                return sim;
            };
            blocks.last = report;
            update_sim_on_cluster(vcov::script(), blocks, cfg);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
