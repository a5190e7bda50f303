#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "simengine/archive.hpp"
#include "simengine/context.hpp"
#include "simengine/executor.hpp"
#include "simengine/plan.hpp"
#include "simengine/state.hpp"

namespace simengine {

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::uint64_t entropy_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
}

inline std::string format_percent(std::size_t part, std::size_t total) {
    const double pct = std::round(10000.0 * static_cast<double>(part) / static_cast<double>(total)) / 100.0;
    return display_double(pct) + "%";
}

/// "Done. No errors or warnings detected." or the error/warning shares.
inline std::string completion_report(std::size_t n_run, std::size_t n_errors, std::size_t n_warnings) {
    if (n_errors == 0 && n_warnings == 0) return "Done. No errors or warnings detected.";
    std::string out = "Done.";
    if (n_errors) out += " Errors detected in " + format_percent(n_errors, n_run) + " of replicates.";
    if (n_warnings) out += " Warnings detected in " + format_percent(n_warnings, n_run) + " of replicates.";
    return out;
}

/// A simulation study: levels, config, script and everything it produced.
class Simulation {
public:
    /// Replaces local execution. Returning nullopt means the outcomes were
    /// handled elsewhere (a job-array task) and the state is left untouched.
    using Runner = std::function<std::optional<std::vector<ReplicateOutcome>>(const ExecutionRequest&)>;

    /// New simulation with a freshly drawn, recorded global seed.
    Simulation() {
        state_.config.seed = entropy_seed();
        state_.created_at = utc_timestamp();
    }

    explicit Simulation(SimulationState state) : state_(std::move(state)) {}

    static Simulation load(const std::filesystem::path& path) { return Simulation(archive::load(path)); }
    void save(const std::filesystem::path& path) const { archive::save(state_, path); }

    Simulation& set_levels(LevelSchema schema) {
        schema.validate();
        state_.schema = std::move(schema);
        return *this;
    }

    Simulation& set_config(SimConfig config) {
        config.validate(state_.schema);
        state_.config = std::move(config);
        return *this;
    }

    SimConfig& config() noexcept { return state_.config; }
    const SimConfig& config() const noexcept { return state_.config; }
    const LevelSchema& levels() const noexcept { return state_.schema; }

    Simulation& set_script(Script script) {
        script_ = std::move(script);
        return *this;
    }
    const Script& script() const noexcept { return script_; }

    /// Runs every planned replicate.
    Simulation& run() {
        if (state_.has_run())
            throw UsageError("simulation has already run; change levels/config and call update()");
        state_.config.validate(state_.schema);
        Plan plan = build_plan(state_.schema, state_.config);
        std::vector<ReplicateId> work = plan.replicates;
        execute_and_commit(std::move(plan), work, {});
        return *this;
    }

    /// Brings a finished simulation in line with the current levels/config,
    /// running only new replicates and dropping removed ones.
    Simulation& update() {
        if (!state_.has_run()) throw UsageError("update() needs a simulation that has already run");
        auto up = plan_update(state_.plan, *state_.run_config, state_.schema, state_.config);
        execute_and_commit(std::move(up.next), up.to_run, up.to_drop);
        return *this;
    }

    const SimulationState& state() const noexcept { return state_; }
    const std::vector<ResultRow>& results() const noexcept { return state_.results; }
    const std::vector<MessageRow>& errors() const noexcept { return state_.errors; }
    const std::vector<MessageRow>& warnings() const noexcept { return state_.warnings; }

    const Blob& get_complex(std::uint64_t sim_uid) const {
        auto it = state_.complex_store.find(sim_uid);
        if (it == state_.complex_store.end())
            throw NotFoundError("no complex data stored for sim_uid " + std::to_string(sim_uid));
        return it->second;
    }

    /// Payload attached with ReplicateOutput::attach_complex.
    Json get_complex_json(std::uint64_t sim_uid) const {
        const Blob& blob = get_complex(sim_uid);
        return Json::from_cbor(std::vector<std::uint8_t>(blob.begin(), blob.end()));
    }

    /// Where the progress bar and completion report go; nullptr silences
    /// both. The bar is only drawn when this is std::cout on a terminal.
    void set_report_stream(std::ostream* out) noexcept { report_ = out; }
    void set_runner(Runner runner) { runner_ = std::move(runner); }

private:
    void execute_and_commit(Plan next, const std::vector<ReplicateId>& work, const std::vector<ReplicateId>& drop) {
        if (!script_) throw UsageError("no simulation script has been set");
        const SimConfig& cfg = state_.config;
        if (cfg.parallel && cfg.uses_batches() && !cfg.n_workers)
            throw ConfigError("n_workers must be set explicitly when a simulation with batch blocks runs in parallel");

        ExecutionRequest req{next, work, cfg, state_.schema, script_};
        const std::string start_time = utc_timestamp();
        const auto start = std::chrono::steady_clock::now();
        std::optional<std::vector<ReplicateOutcome>> outcomes;
        if (runner_) {
            outcomes = runner_(req);
        } else {
            const bool draw = report_ == &std::cout && isatty(STDOUT_FILENO);
            Progress progress(draw ? report_ : nullptr, work.size());
            outcomes = execute_local(req, &progress);
        }
        if (!outcomes) return;
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        std::set<std::uint64_t> dropped;
        for (const auto& r : drop) dropped.insert(r.sim_uid);
        auto gone = [&](const auto& row) { return dropped.count(row.id.sim_uid) > 0; };
        std::erase_if(state_.results, gone);
        std::erase_if(state_.errors, gone);
        std::erase_if(state_.warnings, gone);
        std::erase_if(state_.complex_store, [&](const auto& kv) { return dropped.count(kv.first) > 0; });

        std::size_t n_errors = 0, n_warnings = 0;
        for (auto& o : *outcomes) {
            if (o.result) state_.results.push_back(std::move(*o.result));
            if (o.error) {
                state_.errors.push_back(std::move(*o.error));
                ++n_errors;
            }
            if (o.warning) {
                state_.warnings.push_back(std::move(*o.warning));
                ++n_warnings;
            }
            if (o.complex) state_.complex_store[o.id.sim_uid] = std::move(*o.complex);
        }
        sort_by_uid(state_.results);
        sort_by_uid(state_.errors);
        sort_by_uid(state_.warnings);

        state_.plan = std::move(next);
        state_.run_config = cfg;
        state_.total_runtime = elapsed;
        state_.start_time = start_time;
        state_.end_time = utc_timestamp();
        state_.check_partition();
        if (report_) *report_ << completion_report(outcomes->size(), n_errors, n_warnings) << '\n';
    }

    SimulationState state_;
    Script script_;
    Runner runner_;
    std::ostream* report_ = &std::cout;
};

}  // namespace simengine
