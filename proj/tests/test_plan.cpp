#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "simengine/plan.hpp"
#include "simengine/studies/poisson.hpp"

using namespace simengine;

namespace {

SimConfig reps(std::uint64_t n) {
    SimConfig c;
    c.num_sim = n;
    return c;
}

// Random schemas for the property tests: 1-3 variables, 1-4 values each,
// values drawn from a small pool so updates can add and remove them.
struct SchemaGen {
    std::mt19937_64 gen;
    explicit SchemaGen(std::uint64_t seed) : gen(seed) {}

    std::size_t pick(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(gen); }

    std::vector<LevelValue> values(const std::string& var) {
        std::vector<LevelValue> pool;
        if (var == "a") pool = {1, 2, 3, 4, 5};
        if (var == "b") pool = {"x", "y", "z"};
        if (var == "c") pool = {0.5, 1.5, 2.5, 3.5};
        std::shuffle(pool.begin(), pool.end(), gen);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick(1, std::min<std::size_t>(4, pool.size()))), pool.end());
        return pool;
    }

    LevelSchema schema() {
        std::vector<std::string> vars{"a", "b", "c"};
        std::shuffle(vars.begin(), vars.end(), gen);
        vars.resize(pick(1, 3));
        LevelSchema s;
        for (const auto& v : vars) s.add(v, values(v));
        return s;
    }

    // Same variables, each value list re-drawn.
    LevelSchema mutate(const LevelSchema& s) {
        LevelSchema out;
        for (const auto& var : s.variables()) out.add(var.name, values(var.name));
        return out;
    }
};

std::map<std::pair<std::uint64_t, std::uint64_t>, int> level_rep_counts(const Plan& p) {
    std::map<std::pair<std::uint64_t, std::uint64_t>, int> counts;
    for (const auto& r : p.replicates) ++counts[{r.level_id, r.rep_id}];
    return counts;
}

}  // namespace

TEST(Enumerate, FirstVariableVariesFastest) {
    LevelSchema s;
    s.add("estimator", {"M", "V"}).add("n", {10, 100, 1000});
    const auto combos = enumerate_combos(s);
    ASSERT_EQ(combos.size(), 6u);
    const std::vector<std::pair<std::string, int>> expected{{"M", 10}, {"V", 10}, {"M", 100},
                                                            {"V", 100}, {"M", 1000}, {"V", 1000}};
    for (std::size_t i = 0; i < combos.size(); ++i) {
        EXPECT_EQ(combos[i].level_id, i + 1);
        EXPECT_EQ(combos[i].text("estimator"), expected[i].first);
        EXPECT_EQ(combos[i].integer("n"), expected[i].second);
    }
}

TEST(Schema, Validation) {
    EXPECT_THROW(LevelSchema().add("n", {}).validate(), SchemaError);
    EXPECT_THROW(LevelSchema().add("n", {1}).add("n", {2}).validate(), SchemaError);
    EXPECT_THROW(LevelSchema().add("n", {1, 1}).validate(), SchemaError);
    EXPECT_THROW(LevelSchema().add("", {1}).validate(), SchemaError);
    EXPECT_NO_THROW(LevelSchema().add("n", {1, 2}).validate());
}

TEST(Config, Validation) {
    LevelSchema s;
    s.add("n", {1});
    EXPECT_THROW(build_plan(s, reps(0)), ConfigError);
    auto c = reps(2);
    c.n_workers = 0;
    EXPECT_THROW(build_plan(s, c), ConfigError);
    c = reps(2);
    c.batch_levels = std::vector<std::string>{"mu"};
    EXPECT_THROW(build_plan(s, c), ConfigError);
}

TEST(BuildPlan, PoissonGrid) {
    const auto plan = build_plan(studies::poisson::levels(), studies::poisson::config());
    ASSERT_EQ(plan.replicates.size(), 600u);
    EXPECT_EQ(plan.uid_counter, 600u);
    // level-major uids
    EXPECT_EQ(plan.replicates[0], (ReplicateId{1, 1, 1, 1}));
    EXPECT_EQ(plan.replicates[99], (ReplicateId{100, 1, 100, 100}));
    EXPECT_EQ(plan.replicates[100], (ReplicateId{101, 2, 1, 101}));
    EXPECT_EQ(plan.replicates[599].level_id, 6u);
}

TEST(Batches, EmptyBatchLevelsGroupByReplicate) {
    LevelSchema s;
    s.add("method", {"a", "b", "c"});
    auto c = reps(3);
    c.batch_levels = std::vector<std::string>{};
    const auto plan = build_plan(s, c);
    EXPECT_EQ(count_batches(plan.replicates), 3u);
    for (const auto& r : plan.replicates) EXPECT_EQ(r.batch_id, r.rep_id);
}

TEST(Batches, SubsetOfLevels) {
    LevelSchema s;
    s.add("n", {10, 20}).add("mu", {0.0, 1.0}).add("est", {"a", "b", "c"});
    auto c = reps(2);
    c.batch_levels = std::vector<std::string>{"n", "mu"};
    const auto plan = build_plan(s, c);
    EXPECT_EQ(count_batches(plan.replicates), 8u);
    std::map<std::uint64_t, std::set<std::string>> members;
    for (const auto& r : plan.replicates) {
        const auto& combo = plan.combo(r.level_id);
        members[r.batch_id].insert(combo.text("est"));
    }
    for (const auto& [id, ests] : members) EXPECT_EQ(ests.size(), 3u) << "batch " << id;
}

TEST(Schedule, EvenSplitWithoutBatches) {
    LevelSchema s;
    s.add("n", {1});
    const auto plan = build_plan(s, reps(20));
    const auto chunks = schedule(plan.replicates, 5);
    ASSERT_EQ(chunks.size(), 5u);
    for (std::size_t w = 0; w < 5; ++w) {
        EXPECT_EQ(chunks[w].replicates.size(), 4u);
        EXPECT_EQ(chunks[w].replicates.front().sim_uid, 4 * w + 1);
    }
}

TEST(Schedule, BatchesStayTogether) {
    LevelSchema s;
    s.add("n", {10, 20}).add("mu", {0.0, 1.0}).add("est", {"a", "b", "c"});
    auto c = reps(2);
    c.batch_levels = std::vector<std::string>{"n", "mu"};
    const auto plan = build_plan(s, c);
    const auto chunks = schedule(plan.replicates, 3, true);
    ASSERT_EQ(chunks.size(), 3u);
    EXPECT_EQ(chunks[0].batch_ids.size(), 3u);
    EXPECT_EQ(chunks[1].batch_ids.size(), 3u);
    EXPECT_EQ(chunks[2].batch_ids.size(), 2u);
    EXPECT_THROW(schedule(plan.replicates, 9, true), ConfigError);
    EXPECT_NO_THROW(schedule(plan.replicates, 8, true));
}

TEST(Schedule, MoreWorkersThanReplicatesLeavesEmptyChunks) {
    LevelSchema s;
    s.add("n", {1});
    const auto plan = build_plan(s, reps(2));
    const auto chunks = schedule(plan.replicates, 4);
    ASSERT_EQ(chunks.size(), 4u);
    EXPECT_EQ(chunks[0].replicates.size(), 1u);
    EXPECT_EQ(chunks[1].replicates.size(), 1u);
    EXPECT_TRUE(chunks[2].replicates.empty());
    EXPECT_THROW(schedule(plan.replicates, 0), ConfigError);
}

TEST(Update, AddLevelAndReplicates) {
    namespace P = studies::poisson;
    const auto old = build_plan(P::levels(), P::config(100));
    const auto up = plan_update(old, P::config(100), P::updated_levels(), P::config(200));
    EXPECT_EQ(up.to_keep.size(), 600u);
    EXPECT_EQ(up.to_run.size(), 1000u);
    EXPECT_TRUE(up.to_drop.empty());
    EXPECT_EQ(up.next.replicates.size(), 1600u);
    EXPECT_EQ(up.next.uid_counter, 1600u);
    // old combos keep their ids, new ones are appended
    for (std::uint64_t id = 1; id <= 6; ++id) EXPECT_EQ(up.next.combo(id).assignments, old.combo(id).assignments);
    EXPECT_EQ(up.next.combo(7).integer("n"), 10000);
    EXPECT_EQ(up.next.combo(8).integer("n"), 10000);
    // new uids run level ascending then rep ascending
    EXPECT_EQ(up.to_run.front(), (ReplicateId{601, 1, 101, 601}));
    EXPECT_EQ(up.to_run[99].rep_id, 200u);
    EXPECT_EQ(up.to_run[100].level_id, 2u);
    EXPECT_EQ(up.to_run.back().level_id, 8u);
}

TEST(Update, ReduceReplicates) {
    namespace P = studies::poisson;
    const auto old = build_plan(P::levels(), P::config(100));
    const auto up = plan_update(old, P::config(100), P::levels(), P::config(50));
    EXPECT_EQ(up.to_drop.size(), 300u);
    EXPECT_EQ(up.to_keep.size(), 300u);
    EXPECT_TRUE(up.to_run.empty());
    for (const auto& r : up.to_drop) EXPECT_GT(r.rep_id, 50u);
}

TEST(Update, UnchangedIsEmpty) {
    namespace P = studies::poisson;
    const auto old = build_plan(P::levels(), P::config(100));
    const auto up = plan_update(old, P::config(100), P::levels(), P::config(100));
    EXPECT_TRUE(up.to_run.empty());
    EXPECT_TRUE(up.to_drop.empty());
    EXPECT_EQ(up.next, old);
}

TEST(Update, RemovedValueKeepsOtherIds) {
    LevelSchema s;
    s.add("n", {10, 20, 30});
    const auto old = build_plan(s, reps(2));
    LevelSchema t;
    t.add("n", {30, 10, 40});
    const auto up = plan_update(old, reps(2), t, reps(2));
    ASSERT_EQ(up.next.combos.size(), 3u);
    EXPECT_EQ(up.next.combos[0].level_id, 1u);
    EXPECT_EQ(up.next.combos[1].level_id, 3u);
    EXPECT_EQ(up.next.combos[2].level_id, 4u);
    EXPECT_EQ(up.next.combo(4).integer("n"), 40);
    EXPECT_EQ(up.to_drop.size(), 2u);
    EXPECT_FALSE(up.next.has_level(2));
}

TEST(Update, BatchedSimulationsOnlyShrink) {
    LevelSchema s;
    s.add("n", {10, 20}).add("est", {"a", "b"});
    auto c = reps(4);
    c.batch_levels = std::vector<std::string>{"n"};
    const auto old = build_plan(s, c);
    auto more = c;
    more.num_sim = 5;
    EXPECT_THROW(plan_update(old, c, s, more), ConfigError);
    auto fewer = c;
    fewer.num_sim = 2;
    const auto up = plan_update(old, c, s, fewer);
    EXPECT_EQ(up.to_drop.size(), 8u);
    LevelSchema dropped;
    dropped.add("n", {10}).add("est", {"a", "b"});
    EXPECT_NO_THROW(plan_update(old, c, dropped, c));
}

// ---- properties ---------------------------------------------------------------

TEST(PlanProperty, SizeOrderAndCoverage) {
    SchemaGen g(1);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = g.schema();
        const auto n = g.pick(1, 6);
        const auto plan = build_plan(s, reps(n));
        ASSERT_EQ(plan.replicates.size(), s.combo_count() * n);
        for (std::size_t i = 0; i < plan.replicates.size(); ++i) {
            const auto& r = plan.replicates[i];
            ASSERT_EQ(r.sim_uid, i + 1);
            ASSERT_EQ(r.level_id, i / n + 1);
            ASSERT_EQ(r.rep_id, i % n + 1);
        }
        // every assignment distinct
        for (std::size_t i = 0; i < plan.combos.size(); ++i)
            for (std::size_t j = i + 1; j < plan.combos.size(); ++j)
                ASSERT_FALSE(plan.combos[i].same_values(plan.combos[j]));
    }
}

TEST(PlanProperty, BatchKeysMatchIds) {
    SchemaGen g(2);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = g.schema();
        auto c = reps(g.pick(1, 4));
        std::vector<std::string> names;
        for (const auto& n : s.names())
            if (g.pick(0, 1)) names.push_back(n);
        c.batch_levels = names;
        const auto plan = build_plan(s, c);
        std::map<std::string, std::uint64_t> key_to_id;
        std::map<std::uint64_t, std::string> id_to_key;
        for (const auto& r : plan.replicates) {
            const auto key = batch_key(plan.combo(r.level_id), names, r.rep_id);
            auto [a, fresh_key] = key_to_id.emplace(key, r.batch_id);
            ASSERT_EQ(a->second, r.batch_id);
            auto [b, fresh_id] = id_to_key.emplace(r.batch_id, key);
            ASSERT_EQ(b->second, key);
        }
        std::size_t expected = c.num_sim;
        for (const auto& var : s.variables())
            if (std::find(names.begin(), names.end(), var.name) != names.end()) expected *= var.values.size();
        ASSERT_EQ(key_to_id.size(), expected);
        ASSERT_EQ(id_to_key.rbegin()->first, expected);  // ids are 1..B
    }
}

TEST(ScheduleProperty, PartitionsWorkAlongBatches) {
    SchemaGen g(3);
    for (int trial = 0; trial < 300; ++trial) {
        const auto s = g.schema();
        auto c = reps(g.pick(1, 5));
        if (g.pick(0, 1)) c.batch_levels = std::vector<std::string>{s.names().front()};
        const auto plan = build_plan(s, c);
        const auto n_batches = count_batches(plan.replicates);
        const auto workers = g.pick(1, n_batches + 2);
        const bool strict = c.uses_batches();
        if (strict && workers > n_batches) {
            ASSERT_THROW(schedule(plan.replicates, workers, strict), ConfigError);
            continue;
        }
        const auto chunks = schedule(plan.replicates, workers, strict);
        ASSERT_EQ(chunks.size(), workers);
        std::vector<std::uint64_t> uids;
        std::uint64_t last_batch = 0;
        std::map<std::uint64_t, std::size_t> owner;
        for (std::size_t w = 0; w < chunks.size(); ++w) {
            if (workers <= n_batches) ASSERT_FALSE(chunks[w].replicates.empty()) << "worker " << w;
            for (auto b : chunks[w].batch_ids) {
                ASSERT_GT(b, last_batch);  // contiguous, ascending
                last_batch = b;
            }
            for (const auto& r : chunks[w].replicates) {
                uids.push_back(r.sim_uid);
                auto [it, inserted] = owner.emplace(r.batch_id, w);
                ASSERT_EQ(it->second, w) << "batch " << r.batch_id << " split";
            }
        }
        std::sort(uids.begin(), uids.end());
        ASSERT_EQ(uids.size(), plan.replicates.size());
        for (std::size_t i = 0; i < uids.size(); ++i) ASSERT_EQ(uids[i], i + 1);
    }
}

TEST(UpdateProperty, StableIdsAndExactCoverage) {
    SchemaGen g(4);
    for (int trial = 0; trial < 100; ++trial) {
        auto schema = g.schema();
        auto config = reps(g.pick(1, 4));
        auto plan = build_plan(schema, config);
        for (int step = 0; step < 5; ++step) {
            const auto next_schema = g.mutate(schema);
            const auto next_config = reps(g.pick(1, 4));
            const auto up = plan_update(plan, config, next_schema, next_config);

            // kept rows unchanged; keep + drop = old
            ASSERT_EQ(up.to_keep.size() + up.to_drop.size(), plan.replicates.size());
            for (const auto& r : up.to_keep)
                ASSERT_NE(std::find(plan.replicates.begin(), plan.replicates.end(), r), plan.replicates.end());
            // fresh uids after the counter, in (level, rep) order
            std::uint64_t expect_uid = plan.uid_counter;
            for (std::size_t i = 0; i < up.to_run.size(); ++i) {
                ASSERT_EQ(up.to_run[i].sim_uid, ++expect_uid);
                if (i) {
                    const auto& a = up.to_run[i - 1];
                    const auto& b = up.to_run[i];
                    ASSERT_TRUE(a.level_id < b.level_id || (a.level_id == b.level_id && a.rep_id < b.rep_id));
                }
            }
            ASSERT_EQ(up.next.uid_counter, expect_uid);
            // a value combination that existed before keeps its id; new ones exceed all old ids
            std::uint64_t max_old = 0;
            for (const auto& c : plan.combos) max_old = std::max(max_old, c.level_id);
            for (const auto& c : up.next.combos) {
                auto old = std::find_if(plan.combos.begin(), plan.combos.end(),
                                        [&](const LevelCombo& o) { return o.same_values(c); });
                if (old != plan.combos.end()) ASSERT_EQ(old->level_id, c.level_id);
                else ASSERT_GT(c.level_id, max_old);
            }
            // every surviving (level, rep) exactly once
            const auto counts = level_rep_counts(up.next);
            ASSERT_EQ(counts.size(), up.next.combos.size() * next_config.num_sim);
            for (const auto& [key, n] : counts) {
                ASSERT_EQ(n, 1);
                ASSERT_LE(key.second, next_config.num_sim);
            }
            ASSERT_EQ(up.next.replicates.size(), up.to_keep.size() + up.to_run.size());

            schema = next_schema;
            config = next_config;
            plan = up.next;
        }
    }
}

TEST(UpdateProperty, RepeatedUpdateIsIdempotent) {
    SchemaGen g(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = g.schema();
        const auto c = reps(g.pick(1, 4));
        const auto plan = build_plan(s, c);
        const auto s2 = g.mutate(s);
        const auto c2 = reps(g.pick(1, 4));
        const auto first = plan_update(plan, c, s2, c2);
        const auto again = plan_update(first.next, c2, s2, c2);
        ASSERT_TRUE(again.to_run.empty());
        ASSERT_TRUE(again.to_drop.empty());
        ASSERT_EQ(again.next, first.next);
    }
}
