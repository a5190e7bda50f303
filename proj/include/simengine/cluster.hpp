#pragma once

// Job-array execution. One program runs in three phases selected by the
// sim_run environment variable:
//   first  builds the simulation and saves it to <dir>/sim.state
//   main   (once per array task) runs the task's share of the replicates and
//          writes <dir>/sim_results/{r,e,c}_<tid>
//   last   compiles the task files, runs the last block, saves the final
//          state to <dir>/sim.state and removes sim_results
// Without sim_run all three blocks run in-process and nothing is written.
//
// The array size seen by main and last is, in order of preference, the
// sim_n_tasks variable (the emulator sets it), an explicit n_workers in the
// config, or the number of batches to run. Tasks get work through the same
// schedule() used for local threads.

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "simengine/archive.hpp"
#include "simengine/simulation.hpp"

extern char** environ;

namespace simengine {

namespace fs = std::filesystem;

enum class Phase { local, first, main, last };

inline const char* phase_name(Phase p) {
    switch (p) {
    case Phase::local: return "local";
    case Phase::first: return "first";
    case Phase::main: return "main";
    case Phase::last: return "last";
    }
    return "?";
}

/// Lookup of environment variables; nullopt when unset.
using Environment = std::function<std::optional<std::string>(const std::string&)>;

inline Environment process_environment() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

/// The given variables on top of `base`.
inline Environment overlay_environment(std::map<std::string, std::string> vars, Environment base) {
    return [vars = std::move(vars), base = std::move(base)](const std::string& name) -> std::optional<std::string> {
        if (auto it = vars.find(name); it != vars.end()) return it->second;
        return base ? base(name) : std::nullopt;
    };
}

inline Phase detect_phase(const Environment& env, const std::string& var = "sim_run") {
    const auto v = env(var);
    if (!v || v->empty()) return Phase::local;
    if (*v == "first") return Phase::first;
    if (*v == "main") return Phase::main;
    if (*v == "last") return Phase::last;
    throw ConfigError("unrecognized value '" + *v + "' of " + var + " (expected first, main or last)");
}

struct Scheduler {
    std::string name;
    std::string js_code;
    std::string tid_var;
};

inline const std::vector<Scheduler>& js_support() {
    static const std::vector<Scheduler> table{
        {"Slurm", "slurm", "SLURM_ARRAY_TASK_ID"},
        {"Grid Engine", "sge", "SGE_TASK_ID"},
    };
    return table;
}

inline const Scheduler& find_scheduler(std::string_view js_code) {
    for (const auto& s : js_support())
        if (s.js_code == js_code) return s;
    throw NotFoundError("unsupported job scheduler '" + std::string(js_code) + "'");
}

struct ClusterConfig {
    std::string js;       // scheduler code from js_support()
    std::string tid_var;  // overrides the scheduler's task id variable
    fs::path dir = ".";
    std::string phase_var = "sim_run";
    std::string n_tasks_var = "sim_n_tasks";

    std::string resolved_tid_var() const {
        if (!tid_var.empty()) return tid_var;
        if (!js.empty()) return find_scheduler(js).tid_var;
        throw ConfigError("cluster config needs js or tid_var to find the array task id");
    }
    fs::path state_path() const { return dir / "sim.state"; }
};

struct ClusterBlocks {
    /// Builds (run_on_cluster) or loads and modifies (update_sim_on_cluster)
    /// the simulation.
    std::function<Simulation()> first;
    /// Defaults to run() for a fresh simulation and update() otherwise.
    std::function<void(Simulation&)> main;
    /// Runs on the compiled simulation, e.g. to summarize or export.
    std::function<void(Simulation&)> last;
};

namespace detail {

inline std::uint64_t parse_count(const std::string& text, const std::string& what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || v == 0)
        throw ProtocolError(what + " must be a positive integer, got '" + text + "'");
    return v;
}

inline std::uint64_t resolve_n_tasks(const ExecutionRequest& req, const ClusterConfig& cfg, const Environment& env) {
    const auto from_env = env(cfg.n_tasks_var);
    if (from_env) {
        const auto n = parse_count(*from_env, cfg.n_tasks_var);
        if (req.config.n_workers && *req.config.n_workers != n)
            throw ProtocolError("array size " + std::to_string(n) + " does not match n_workers = " +
                                std::to_string(*req.config.n_workers));
        return n;
    }
    if (req.config.n_workers) return *req.config.n_workers;
    return std::max<std::uint64_t>(1, count_batches(req.work));
}

inline std::vector<WorkerAssignment> task_chunks(const ExecutionRequest& req, std::uint64_t n_tasks) {
    if (req.work.empty()) return std::vector<WorkerAssignment>(n_tasks);
    return schedule(req.work, n_tasks, req.config.uses_batches());
}

inline void default_main(Simulation& sim) {
    if (sim.state().has_run()) {
        sim.update();
    } else {
        sim.run();
    }
}

inline Simulation load_state(const ClusterConfig& cfg, Phase phase) {
    if (!fs::exists(cfg.state_path()))
        throw ProtocolError(std::string("the ") + phase_name(phase) + " phase needs " + cfg.state_path().string() +
                            ", written by the first phase");
    return Simulation::load(cfg.state_path());
}

inline std::optional<Simulation> cluster_driver(const Script& script, const ClusterBlocks& blocks,
                                                const ClusterConfig& cfg, const Environment& env, bool updating) {
    if (!blocks.first) throw UsageError("the first block is required");
    const Phase phase = detect_phase(env, cfg.phase_var);
    auto main_block = blocks.main ? blocks.main : default_main;
    auto check_first = [&](const Simulation& sim) {
        if (updating && !sim.state().has_run())
            throw UsageError("update_sim_on_cluster needs a simulation that has already run");
        if (!updating && sim.state().has_run())
            throw UsageError("the simulation has already run; use update_sim_on_cluster");
    };

    switch (phase) {
    case Phase::local: {
        Simulation sim = blocks.first();
        check_first(sim);
        sim.set_script(script);
        main_block(sim);
        if (blocks.last) blocks.last(sim);
        return sim;
    }
    case Phase::first: {
        Simulation sim = blocks.first();
        check_first(sim);
        // Validate now rather than in every array task.
        sim.config().validate(sim.levels());
        sim.levels().validate();
        fs::create_directories(cfg.dir);
        sim.save(cfg.state_path());
        fs::remove_all(archive::results_dir(cfg.dir));
        fs::create_directories(archive::results_dir(cfg.dir));
        return std::nullopt;
    }
    case Phase::main: {
        const std::string tid_var = cfg.resolved_tid_var();
        const auto tid_text = env(tid_var);
        if (!tid_text) throw ProtocolError("the main phase needs the task id in " + tid_var);
        const std::uint64_t tid = parse_count(*tid_text, tid_var);
        Simulation sim = load_state(cfg, phase);
        sim.set_script(script);
        sim.set_report_stream(nullptr);
        sim.set_runner([&](const ExecutionRequest& req) -> std::optional<std::vector<ReplicateOutcome>> {
            const auto n_tasks = resolve_n_tasks(req, cfg, env);
            if (tid > n_tasks)
                throw ProtocolError("task id " + std::to_string(tid) + " is outside 1.." + std::to_string(n_tasks));
            const auto chunks = task_chunks(req, n_tasks);
            auto outcomes = execute_assignments(req, std::span<const WorkerAssignment>(&chunks[tid - 1], 1));
            archive::write_task_files(cfg.dir, tid, outcomes);
            return std::nullopt;
        });
        main_block(sim);
        return std::nullopt;
    }
    case Phase::last: {
        Simulation sim = load_state(cfg, phase);
        sim.set_script(script);
        sim.set_runner([&](const ExecutionRequest& req) -> std::optional<std::vector<ReplicateOutcome>> {
            const auto n_tasks = resolve_n_tasks(req, cfg, env);
            auto outcomes = archive::read_task_files(cfg.dir, n_tasks);
            std::set<std::uint64_t> expected, found;
            for (const auto& r : req.work) expected.insert(r.sim_uid);
            for (const auto& o : outcomes) {
                if (!expected.count(o.id.sim_uid))
                    throw ProtocolError("task files hold sim_uid " + std::to_string(o.id.sim_uid) +
                                        ", which is not part of this run");
                found.insert(o.id.sim_uid);
            }
            for (auto uid : expected)
                if (!found.count(uid)) throw ProtocolError("no task produced sim_uid " + std::to_string(uid));
            return outcomes;
        });
        default_main(sim);
        sim.set_runner({});
        if (blocks.last) blocks.last(sim);
        sim.save(cfg.state_path());
        fs::remove_all(archive::results_dir(cfg.dir));
        return sim;
    }
    }
    return std::nullopt;
}

}  // namespace detail

/// Returns the finished simulation in the local and last phases.
inline std::optional<Simulation> run_on_cluster(const Script& script, const ClusterBlocks& blocks,
                                                const ClusterConfig& cfg = {},
                                                const Environment& env = process_environment()) {
    return detail::cluster_driver(script, blocks, cfg, env, false);
}

/// Like run_on_cluster, but `first` loads an already-run simulation and
/// changes its levels or config; only new replicates run.
inline std::optional<Simulation> update_sim_on_cluster(const Script& script, const ClusterBlocks& blocks,
                                                       const ClusterConfig& cfg = {},
                                                       const Environment& env = process_environment()) {
    return detail::cluster_driver(script, blocks, cfg, env, true);
}

/// The three submission commands; <JID1>/<JID2> stand for the job ids the
/// scheduler prints for the first two submissions.
inline std::string gen_submit(std::string_view js_code, const std::string& script, std::uint64_t n_tasks) {
    if (n_tasks == 0) throw ConfigError("the array needs at least one task");
    const Scheduler& s = find_scheduler(js_code);
    const std::string n = std::to_string(n_tasks);
    if (s.js_code == "slurm")
        return "sbatch --export=sim_run='first' " + script + "\n" + "sbatch --export=sim_run='main' --array=1-" + n +
               " --depend=afterok:<JID1> " + script + "\n" + "sbatch --export=sim_run='last' --depend=afterok:<JID2> " +
               script + "\n";
    return "qsub -v sim_run='first' " + script + "\n" + "qsub -v sim_run='main' -t 1-" + n + " -hold_jid <JID1> " +
           script + "\n" + "qsub -v sim_run='last' -hold_jid <JID2> " + script + "\n";
}

// ---- emulation ----------------------------------------------------------------

struct EmulateOptions {
    std::string tid_var = "SLURM_ARRAY_TASK_ID";
    std::string phase_var = "sim_run";
    std::string n_tasks_var = "sim_n_tasks";
    /// Main tasks that are not run (simulated crashes).
    std::set<std::uint64_t> skip_tasks;
    Environment base = process_environment();
};

/// A simulation program: typically a lambda forwarding `env` to
/// run_on_cluster or update_sim_on_cluster.
using ClusterProgram = std::function<std::optional<Simulation>(const Environment&)>;

inline Environment phase_environment(Phase phase, std::uint64_t tid, std::uint64_t n_tasks, const EmulateOptions& o) {
    std::map<std::string, std::string> vars{{o.phase_var, phase_name(phase)}, {o.n_tasks_var, std::to_string(n_tasks)}};
    if (phase == Phase::main) vars[o.tid_var] = std::to_string(tid);
    return overlay_environment(std::move(vars), o.base);
}

/// Runs one phase in-process (tid only matters for main).
inline std::optional<Simulation> emulate_phase(const ClusterProgram& program, Phase phase, std::uint64_t tid,
                                               std::uint64_t n_tasks, const EmulateOptions& o = {}) {
    return program(phase_environment(phase, tid, n_tasks, o));
}

/// first, main for tasks 1..n_tasks (minus skip_tasks), then last, all in
/// this process; returns what the last phase returns.
inline std::optional<Simulation> emulate(const ClusterProgram& program, std::uint64_t n_tasks,
                                         const EmulateOptions& o = {}) {
    if (n_tasks == 0) throw ConfigError("the array needs at least one task");
    emulate_phase(program, Phase::first, 0, n_tasks, o);
    for (std::uint64_t tid = 1; tid <= n_tasks; ++tid)
        if (!o.skip_tasks.count(tid)) emulate_phase(program, Phase::main, tid, n_tasks, o);
    return emulate_phase(program, Phase::last, 0, n_tasks, o);
}

namespace detail {

inline std::vector<std::string> child_environment(const std::map<std::string, std::string>& vars) {
    std::vector<std::string> out;
    for (char** e = environ; *e; ++e) {
        std::string entry(*e);
        const auto name = entry.substr(0, entry.find('='));
        if (!vars.count(name)) out.push_back(std::move(entry));
    }
    for (const auto& [k, v] : vars) out.push_back(k + "=" + v);
    return out;
}

inline pid_t spawn(const std::vector<std::string>& argv, const std::vector<std::string>& envp) {
    std::vector<char*> args, envs;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    for (const auto& e : envp) envs.push_back(const_cast<char*>(e.c_str()));
    envs.push_back(nullptr);
    pid_t pid = 0;
    const int rc = posix_spawnp(&pid, args[0], nullptr, nullptr, args.data(), envs.data());
    if (rc != 0) throw ProtocolError("cannot start " + argv[0] + ": " + std::strerror(rc));
    return pid;
}

inline int wait_exit_code(pid_t pid) {
    int status = 0;
    while (waitpid(pid, &status, 0) < 0)
        if (errno != EINTR) return -1;
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

}  // namespace detail

struct ProcessEmulation {
    int first_exit = 0;
    std::map<std::uint64_t, int> main_exit;  // tid -> exit code
    int last_exit = 0;

    bool ok() const {
        if (first_exit != 0 || last_exit != 0) return false;
        for (const auto& [tid, code] : main_exit)
            if (code != 0) return false;
        return true;
    }
};

/// Runs `argv` as first, then n_tasks concurrent main processes, then last.
/// Children inherit this process's environment plus the phase, task id and
/// array size variables. A failed first phase stops the emulation.
inline ProcessEmulation emulate_process(const std::vector<std::string>& argv, std::uint64_t n_tasks,
                                        const EmulateOptions& o = {}) {
    if (argv.empty()) throw UsageError("no program to emulate");
    if (n_tasks == 0) throw ConfigError("the array needs at least one task");
    auto env_for = [&](Phase phase, std::uint64_t tid) {
        std::map<std::string, std::string> vars{{o.phase_var, phase_name(phase)},
                                                {o.n_tasks_var, std::to_string(n_tasks)}};
        if (phase == Phase::main) vars[o.tid_var] = std::to_string(tid);
        return detail::child_environment(vars);
    };
    ProcessEmulation result;
    result.first_exit = detail::wait_exit_code(detail::spawn(argv, env_for(Phase::first, 0)));
    if (result.first_exit != 0) {
        result.last_exit = -1;
        return result;
    }
    std::map<std::uint64_t, pid_t> running;
    for (std::uint64_t tid = 1; tid <= n_tasks; ++tid)
        if (!o.skip_tasks.count(tid)) running[tid] = detail::spawn(argv, env_for(Phase::main, tid));
    for (const auto& [tid, pid] : running) result.main_exit[tid] = detail::wait_exit_code(pid);
    result.last_exit = detail::wait_exit_code(detail::spawn(argv, env_for(Phase::last, 0)));
    return result;
}

}  // namespace simengine
