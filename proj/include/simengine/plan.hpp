#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "simengine/config.hpp"
#include "simengine/errors.hpp"
#include "simengine/levels.hpp"

namespace simengine {

struct ReplicateId {
    std::uint64_t sim_uid = 0;
    std::uint64_t level_id = 0;
    std::uint64_t rep_id = 0;
    std::uint64_t batch_id = 0;

    bool operator==(const ReplicateId&) const = default;
};

/// The level registry together with the replicates planned over it.
struct Plan {
    std::vector<LevelCombo> combos;        // ascending level_id
    std::vector<ReplicateId> replicates;   // ascending sim_uid
    std::uint64_t uid_counter = 0;

    const LevelCombo& combo(std::uint64_t level_id) const {
        if (!has_level(level_id)) throw NotFoundError("unknown level id " + std::to_string(level_id));
        return *std::lower_bound(combos.begin(), combos.end(), level_id,
                                 [](const LevelCombo& c, std::uint64_t id) { return c.level_id < id; });
    }

    bool has_level(std::uint64_t level_id) const {
        auto it = std::lower_bound(combos.begin(), combos.end(), level_id,
                                   [](const LevelCombo& c, std::uint64_t id) { return c.level_id < id; });
        return it != combos.end() && it->level_id == level_id;
    }

    bool operator==(const Plan&) const = default;
};

inline std::string batch_key(const LevelCombo& combo, const std::vector<std::string>& batch_names,
                             std::uint64_t rep_id) {
    return canonical_assignments(combo, batch_names) + "rep=" + std::to_string(rep_id);
}

/// Fills batch_id for every replicate whose batch_id is 0. Replicates that
/// already carry an id keep it, and new replicates with a matching key join
/// that batch. New batches are numbered after the current maximum in
/// ascending sim_uid order.
inline void assign_batches(std::vector<ReplicateId>& replicates, const std::vector<LevelCombo>& combos,
                           const std::vector<std::string>& batch_names) {
    if (!combos.empty()) {
        for (const auto& name : batch_names)
            if (!combos.front().find(name))
                throw ConfigError("batch_levels names unknown level '" + name + "'");
    }
    std::unordered_map<std::uint64_t, const LevelCombo*> by_id;
    for (const auto& c : combos) by_id[c.level_id] = &c;
    auto key_of = [&](const ReplicateId& r) {
        auto it = by_id.find(r.level_id);
        if (it == by_id.end()) throw NotFoundError("unknown level id " + std::to_string(r.level_id));
        return batch_key(*it->second, batch_names, r.rep_id);
    };

    std::unordered_map<std::string, std::uint64_t> ids;
    std::uint64_t next = 0;
    for (const auto& r : replicates) {
        if (r.batch_id == 0) continue;
        ids.emplace(key_of(r), r.batch_id);
        next = std::max(next, r.batch_id);
    }
    for (auto& r : replicates) {
        if (r.batch_id != 0) continue;
        auto [it, inserted] = ids.emplace(key_of(r), next + 1);
        if (inserted) ++next;
        r.batch_id = it->second;
    }
}

/// Fresh plan: uids run level-major (level_id ascending, then rep_id).
inline Plan build_plan(const LevelSchema& schema, const SimConfig& config) {
    schema.validate();
    config.validate(schema);
    Plan plan;
    plan.combos = enumerate_combos(schema);
    std::uint64_t uid = 0;
    for (const auto& combo : plan.combos)
        for (std::uint64_t rep = 1; rep <= config.num_sim; ++rep)
            plan.replicates.push_back({++uid, combo.level_id, rep, 0});
    plan.uid_counter = uid;
    assign_batches(plan.replicates, plan.combos, config.batch_names(schema));
    return plan;
}

struct UpdatePlan {
    Plan next;
    std::vector<ReplicateId> to_keep;
    std::vector<ReplicateId> to_run;
    std::vector<ReplicateId> to_drop;
};

/// Diff between what was run under `old` and the newly declared levels and
/// config. Surviving combos keep their level_id; kept replicates keep their
/// sim_uid and batch_id.
inline UpdatePlan plan_update(const Plan& old, const SimConfig& old_config, const LevelSchema& new_schema,
                              const SimConfig& new_config) {
    new_schema.validate();
    new_config.validate(new_schema);

    UpdatePlan up;
    std::uint64_t last_level = 0;
    for (const auto& c : old.combos) last_level = std::max(last_level, c.level_id);
    for (auto& combo : enumerate_combos(new_schema)) {
        auto match = std::find_if(old.combos.begin(), old.combos.end(),
                                  [&](const LevelCombo& o) { return o.same_values(combo); });
        combo.level_id = match != old.combos.end() ? match->level_id : ++last_level;
        up.next.combos.push_back(std::move(combo));
    }
    std::sort(up.next.combos.begin(), up.next.combos.end(),
              [](const auto& a, const auto& b) { return a.level_id < b.level_id; });

    std::set<std::uint64_t> surviving;
    for (const auto& c : up.next.combos) surviving.insert(c.level_id);

    std::map<std::uint64_t, std::set<std::uint64_t>> present;
    for (const auto& r : old.replicates) {
        if (surviving.count(r.level_id) && r.rep_id <= new_config.num_sim) {
            up.to_keep.push_back(r);
            present[r.level_id].insert(r.rep_id);
        } else {
            up.to_drop.push_back(r);
        }
    }

    std::uint64_t uid = old.uid_counter;
    std::vector<ReplicateId> fresh;
    for (const auto& c : up.next.combos)
        for (std::uint64_t rep = 1; rep <= new_config.num_sim; ++rep)
            if (!present[c.level_id].count(rep)) fresh.push_back({++uid, c.level_id, rep, 0});

    if (old_config.uses_batches() && !fresh.empty())
        throw ConfigError(
            "a simulation that uses batch blocks can only be updated by removing replicates");

    up.next.uid_counter = uid;
    up.next.replicates = up.to_keep;
    up.next.replicates.insert(up.next.replicates.end(), fresh.begin(), fresh.end());
    assign_batches(up.next.replicates, up.next.combos, new_config.batch_names(new_schema));
    up.to_run.assign(up.next.replicates.end() - static_cast<std::ptrdiff_t>(fresh.size()),
                     up.next.replicates.end());
    return up;
}

/// Work handed to one worker (local thread or array task).
struct WorkerAssignment {
    std::vector<std::uint64_t> batch_ids;
    std::vector<ReplicateId> replicates;
};

inline std::size_t count_batches(std::span<const ReplicateId> work) {
    std::set<std::uint64_t> ids;
    for (const auto& r : work) ids.insert(r.batch_id);
    return ids.size();
}

/// Batches (ascending batch_id) are cut into n_workers contiguous chunks of
/// near-equal replicate counts. A chunk closes once its cumulative replicate
/// count reaches ceil(R*(w+1)/n), or when the remaining batches are needed to
/// keep every later chunk non-empty. With `strict` (batch blocks in use)
/// more workers than batches is an error; otherwise trailing chunks may be
/// empty.
inline std::vector<WorkerAssignment> schedule(std::span<const ReplicateId> work, std::size_t n_workers,
                                              bool strict = false) {
    if (n_workers == 0) throw ConfigError("the number of workers must be at least 1");
    std::map<std::uint64_t, std::vector<ReplicateId>> batches;
    for (const auto& r : work) batches[r.batch_id].push_back(r);
    const std::size_t n_batches = batches.size();
    if (strict && n_workers > n_batches)
        throw ConfigError("the number of workers (" + std::to_string(n_workers) +
                          ") cannot exceed the number of batches (" + std::to_string(n_batches) + ")");

    std::vector<WorkerAssignment> chunks(n_workers);
    const std::size_t total = work.size();
    std::size_t w = 0, cum = 0, i = 0;
    for (auto& [batch_id, members] : batches) {
        std::sort(members.begin(), members.end(),
                  [](const auto& a, const auto& b) { return a.sim_uid < b.sim_uid; });
        auto& chunk = chunks[w];
        chunk.batch_ids.push_back(batch_id);
        chunk.replicates.insert(chunk.replicates.end(), members.begin(), members.end());
        cum += members.size();
        ++i;
        const std::size_t batches_left = n_batches - i;
        const std::size_t chunks_left = n_workers - w - 1;
        if (w + 1 < n_workers && (cum * n_workers >= total * (w + 1) || batches_left <= chunks_left)) ++w;
    }
    return chunks;
}

}  // namespace simengine
