// simengine: inspect and summarize archives, print submission commands and
// emulate a job array on this machine.
//
// Exit codes: 0 success, 1 usage error, 2 data or protocol error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "simengine/simengine.hpp"

namespace fs = std::filesystem;
using namespace simengine;

namespace {

void print_table(const Table& t, bool csv) {
    std::cout << (csv ? render_csv(t) : render_text(t));
    for (const auto& note : t.notes) std::cerr << "note: " << note << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inspect, summarize and emulate simulation archives"};
    app.require_subcommand(1);

    std::string table, archive_dir, spec_file, var_name, js = "slurm", script = "run_sim.sh";
    std::optional<std::uint64_t> level_id;
    bool csv = false, mc_se = false;
    std::uint64_t tasks = 1;
    std::string dir = ".", tid_var = "SLURM_ARRAY_TASK_ID";
    std::vector<std::string> program;
    std::vector<std::uint64_t> skip;

    auto* inspect = app.add_subcommand("inspect", "Print the results, errors or warnings table");
    inspect->add_option("table", table, "results, errors or warnings")
        ->required()
        ->check(CLI::IsMember({"results", "errors", "warnings"}));
    inspect->add_option("archive", archive_dir, "Archive directory")->required();
    inspect->add_option("--level-id", level_id, "Only rows of this level combination");
    inspect->add_flag("--csv", csv, "CSV instead of aligned text");

    auto* summarize_cmd = app.add_subcommand("summarize", "Summary statistics per level combination");
    summarize_cmd->add_option("archive", archive_dir, "Archive directory")->required();
    summarize_cmd->add_option("--spec", spec_file, "Spec file, one JSON object per line")->required();
    summarize_cmd->add_flag("--mc-se", mc_se, "Add Monte Carlo standard errors and 95% intervals");
    summarize_cmd->add_flag("--csv", csv, "CSV instead of aligned text");

    auto* vars_cmd = app.add_subcommand("vars", "Print a simulation variable (seed, total_runtime, ...)");
    vars_cmd->add_option("archive", archive_dir, "Archive directory")->required();
    vars_cmd->add_option("name", var_name, "Variable name")->required();

    auto* submit = app.add_subcommand("gen-submit", "Print the three job submission commands");
    submit->add_option("--js", js, "Scheduler code (slurm, sge)");
    submit->add_option("--script", script, "Job script passed to the scheduler");
    submit->add_option("--tasks", tasks, "Number of array tasks")->required()->check(CLI::PositiveNumber);

    auto* emulate_cmd = app.add_subcommand("emulate", "Run a simulation program as a local job array");
    emulate_cmd->add_option("--tasks", tasks, "Number of array tasks")->required()->check(CLI::PositiveNumber);
    emulate_cmd->add_option("--dir", dir, "Directory the program uses for sim.state and sim_results");
    emulate_cmd->add_option("--tid-var", tid_var, "Task id variable given to main tasks");
    emulate_cmd->add_option("--skip-task", skip, "Do not run this main task (repeatable)");
    emulate_cmd->add_option("program", program, "Program and its arguments (after --)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*inspect) {
            const auto state = archive::load(archive_dir);
            if (table == "results") print_table(results_table(state, level_id), csv);
            if (table == "errors") print_table(errors_table(state, level_id), csv);
            if (table == "warnings") print_table(warnings_table(state, level_id), csv);
        } else if (*summarize_cmd) {
            const auto state = archive::load(archive_dir);
            const auto specs = parse_spec_lines(archive::read_file(spec_file));
            print_table(summarize(state, specs, mc_se), csv);
        } else if (*vars_cmd) {
            std::cout << vars_text(vars(archive::load(archive_dir), var_name)) << '\n';
        } else if (*submit) {
            std::cout << gen_submit(js, script, tasks);
        } else if (*emulate_cmd) {
            EmulateOptions opts;
            opts.tid_var = tid_var;
            opts.skip_tasks.insert(skip.begin(), skip.end());
            const auto run = emulate_process(program, tasks, opts);
            if (run.first_exit != 0) {
                std::cerr << "first phase failed (exit " << run.first_exit << ")\n";
                return 2;
            }
            for (const auto& [tid, code] : run.main_exit)
                if (code != 0) std::cerr << "main task " << tid << " failed (exit " << code << ")\n";
            if (run.last_exit != 0) {
                std::cerr << "last phase failed (exit " << run.last_exit << ")\n";
                return 2;
            }
            const fs::path state_path = fs::path(dir) / "sim.state";
            const auto state = archive::load(state_path);  // checks the partition
            std::cout << "emulated " << tasks << " task(s): " << state.results.size() << " results, "
                      << state.errors.size() << " errors, " << state.warnings.size() << " warnings in "
                      << state_path.string() << '\n';
            return run.ok() ? 0 : 2;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
