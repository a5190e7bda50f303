#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "simengine/config.hpp"
#include "simengine/context.hpp"
#include "simengine/plan.hpp"
#include "simengine/state.hpp"

namespace simengine {

struct ReplicateOutcome {
    ReplicateId id;
    std::optional<ResultRow> result;
    std::optional<MessageRow> error;
    std::optional<MessageRow> warning;
    std::optional<Blob> complex;
};

/// Everything needed to execute some replicates of a plan.
struct ExecutionRequest {
    const Plan& plan;
    std::span<const ReplicateId> work;
    const SimConfig& config;
    const LevelSchema& schema;
    const Script& script;
};

/// "|#####     |  50%" bar, only drawn when enabled (terminal output).
class Progress {
public:
    Progress(std::ostream* out, std::size_t total) : out_(out), total_(total) {}

    void tick() {
        const std::size_t done = ++done_;
        if (!out_ || total_ == 0) return;
        const std::size_t pct = done * 100 / total_;
        std::lock_guard lock(mutex_);
        if (pct == last_pct_) return;
        last_pct_ = pct;
        const std::size_t filled = done * kWidth / total_;
        *out_ << "\r  |" << std::string(filled, '#') << std::string(kWidth - filled, ' ') << "| " << pct << '%';
        if (done == total_) *out_ << '\n';
        out_->flush();
    }

private:
    static constexpr std::size_t kWidth = 40;
    std::ostream* out_;
    std::size_t total_;
    std::atomic<std::size_t> done_{0};
    std::size_t last_pct_ = static_cast<std::size_t>(-1);
    std::mutex mutex_;
};

namespace detail {

inline bool valid_output_name(const std::string& name) {
    static const std::regex pattern("[A-Za-z_][A-Za-z0-9_.]*");
    return std::regex_match(name, pattern);
}

inline std::set<std::string> reserved_names(const LevelSchema& schema) {
    std::set<std::string> names{"sim_uid", "level_id", "rep_id", "batch_id", "runtime"};
    for (const auto& n : schema.names()) names.insert(n);
    return names;
}

/// Empty string when the output is acceptable, otherwise the reason.
inline std::string check_output(const ReplicateOutput& out, const std::set<std::string>& reserved) {
    if (out.values().empty()) return "empty output";
    for (const auto& [name, value] : out.values()) {
        if (!valid_output_name(name)) return "invalid output name '" + name + "'";
        if (reserved.count(name)) return "output name '" + name + "' clashes with a reserved or level column";
    }
    return {};
}

inline std::string join_messages(const std::vector<std::string>& messages) {
    std::string out;
    for (const auto& m : messages) {
        if (!out.empty()) out += "; ";
        out += m;
    }
    return out;
}

}  // namespace detail

/// Runs one replicate. Script failures become an error row; with
/// stop_at_error the original exception propagates instead.
inline ReplicateOutcome execute_replicate(const ExecutionRequest& req, const ReplicateId& id, BatchCache& cache,
                                          const std::vector<std::string>& batch_names,
                                          const std::set<std::string>& reserved) {
    const LevelCombo& combo = req.plan.combo(id.level_id);
    ScriptContext ctx(combo, id, req.config.seed, batch_names, cache);
    ReplicateOutcome outcome;
    outcome.id = id;

    std::optional<ReplicateOutput> output;
    std::string message, call;
    const auto start = std::chrono::steady_clock::now();
    try {
        output = req.script(ctx);
    } catch (const ScriptError& e) {
        if (req.config.stop_at_error) throw;
        message = e.what();
        call = e.call();
    } catch (const std::exception& e) {
        if (req.config.stop_at_error) throw;
        message = e.what();
        call = "script";
    } catch (...) {
        if (req.config.stop_at_error) throw;
        message = "unknown error";
        call = "script";
    }
    const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (output) {
        std::string problem = detail::check_output(*output, reserved);
        if (problem.empty() && !cache.check_block_count(id.batch_id, ctx.blocks_used()))
            problem = "number of batch blocks differs between replicates of batch " + std::to_string(id.batch_id);
        if (!problem.empty()) {
            if (req.config.stop_at_error) throw ScriptError(problem, "script output");
            message = std::move(problem);
            call = "script output";
            output.reset();
        }
    }

    if (output) {
        outcome.result = ResultRow{id, runtime, output->values()};
        outcome.complex = output->complex();
    } else {
        outcome.error = MessageRow{id, runtime, message, call};
    }
    if (!ctx.warnings().empty()) outcome.warning = MessageRow{id, runtime, detail::join_messages(ctx.warnings()), "warn()"};
    return outcome;
}

/// Executes the given worker assignments, one thread per non-empty chunk
/// (inline when only one), and returns outcomes ordered by sim_uid.
inline std::vector<ReplicateOutcome> execute_assignments(const ExecutionRequest& req,
                                                         std::span<const WorkerAssignment> chunks,
                                                         Progress* progress = nullptr) {
    const auto batch_names = req.config.batch_names(req.schema);
    const auto reserved = detail::reserved_names(req.schema);
    std::atomic<bool> stop{false};

    struct WorkerResult {
        std::vector<ReplicateOutcome> outcomes;
        std::exception_ptr failure;
        std::uint64_t failed_uid = 0;
    };
    std::vector<WorkerResult> results(chunks.size());

    auto work = [&](std::size_t w) {
        BatchCache cache;
        for (const auto& id : chunks[w].replicates) {
            if (stop.load()) return;
            try {
                results[w].outcomes.push_back(execute_replicate(req, id, cache, batch_names, reserved));
            } catch (...) {
                results[w].failure = std::current_exception();
                results[w].failed_uid = id.sim_uid;
                stop.store(true);
                return;
            }
            if (progress) progress->tick();
        }
    };

    std::vector<std::size_t> busy;
    for (std::size_t w = 0; w < chunks.size(); ++w)
        if (!chunks[w].replicates.empty()) busy.push_back(w);
    if (busy.size() <= 1) {
        for (auto w : busy) work(w);
    } else {
        std::vector<std::jthread> threads;
        threads.reserve(busy.size());
        for (auto w : busy) threads.emplace_back(work, w);
    }

    const WorkerResult* first_failure = nullptr;
    for (const auto& r : results)
        if (r.failure && (!first_failure || r.failed_uid < first_failure->failed_uid)) first_failure = &r;
    if (first_failure) std::rethrow_exception(first_failure->failure);

    std::vector<ReplicateOutcome> merged;
    for (auto& r : results)
        for (auto& o : r.outcomes) merged.push_back(std::move(o));
    std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) { return a.id.sim_uid < b.id.sim_uid; });
    return merged;
}

/// Serial (one worker) or local-parallel execution of the whole request.
inline std::vector<ReplicateOutcome> execute_local(const ExecutionRequest& req, Progress* progress = nullptr) {
    const SimConfig& cfg = req.config;
    if (req.work.empty()) return {};
    std::size_t workers = 1;
    if (cfg.parallel) {
        if (cfg.uses_batches() && !cfg.n_workers)
            throw ConfigError("n_workers must be set explicitly when a simulation with batch blocks runs in parallel");
        workers = cfg.resolved_workers();
        if (!cfg.uses_batches()) workers = std::min(workers, std::max<std::size_t>(1, count_batches(req.work)));
    }
    const auto chunks = schedule(req.work, workers, cfg.parallel && cfg.uses_batches());
    return execute_assignments(req, chunks, progress);
}

}  // namespace simengine
