#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "simengine/config.hpp"
#include "simengine/errors.hpp"
#include "simengine/levels.hpp"
#include "simengine/plan.hpp"
#include "simengine/value.hpp"

namespace simengine {

/// Opaque bytes attached by a script (the engine never interprets them).
using Blob = std::string;

struct ResultRow {
    ReplicateId id;
    double runtime = 0.0;
    std::vector<std::pair<std::string, Scalar>> outputs;

    const Scalar* find(std::string_view name) const {
        for (const auto& [n, v] : outputs)
            if (n == name) return &v;
        return nullptr;
    }

    bool operator==(const ResultRow&) const = default;
};

/// Row of the error or warning table.
struct MessageRow {
    ReplicateId id;
    double runtime = 0.0;
    std::string message;
    std::string call;

    bool operator==(const MessageRow&) const = default;
};

struct SimulationState {
    LevelSchema schema;
    SimConfig config;
    /// Config used by the last run/update; unset until the first run.
    std::optional<SimConfig> run_config;
    Plan plan;
    std::vector<ResultRow> results;
    std::vector<MessageRow> errors;
    std::vector<MessageRow> warnings;
    std::map<std::uint64_t, Blob> complex_store;
    double total_runtime = 0.0;
    std::string created_at;
    std::string start_time;
    std::string end_time;

    bool has_run() const noexcept { return run_config.has_value(); }

    /// After a run every planned sim_uid is in exactly one of results/errors,
    /// and nothing else is.
    void check_partition() const {
        if (!has_run()) return;
        std::set<std::uint64_t> seen;
        auto claim = [&](std::uint64_t uid, const char* table) {
            if (!seen.insert(uid).second)
                throw ArchiveError("sim_uid " + std::to_string(uid) + " appears more than once (" + table + ")");
        };
        for (const auto& r : results) claim(r.id.sim_uid, "results");
        for (const auto& e : errors) claim(e.id.sim_uid, "errors");
        std::set<std::uint64_t> planned;
        for (const auto& r : plan.replicates) planned.insert(r.sim_uid);
        if (seen != planned) {
            for (auto uid : planned)
                if (!seen.count(uid))
                    throw ArchiveError("planned sim_uid " + std::to_string(uid) + " has neither a result nor an error");
            for (auto uid : seen)
                if (!planned.count(uid))
                    throw ArchiveError("sim_uid " + std::to_string(uid) + " is not part of the plan");
        }
        std::set<std::uint64_t> warned;
        for (const auto& w : warnings)
            if (!warned.insert(w.id.sim_uid).second)
                throw ArchiveError("sim_uid " + std::to_string(w.id.sim_uid) + " has two warning rows");
    }

    bool operator==(const SimulationState&) const = default;
};

template <class Row>
void sort_by_uid(std::vector<Row>& rows) {
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.id.sim_uid < b.id.sim_uid; });
}

}  // namespace simengine
