#pragma once

#include <any>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "simengine/errors.hpp"
#include "simengine/levels.hpp"
#include "simengine/plan.hpp"
#include "simengine/rng.hpp"
#include "simengine/state.hpp"

namespace simengine {

/// What a script returns: named scalars plus an optional complex payload.
class ReplicateOutput {
public:
    ReplicateOutput() = default;
    ReplicateOutput(std::initializer_list<std::pair<std::string, Scalar>> values) {
        for (const auto& [name, value] : values) set(name, value);
    }

    ReplicateOutput& set(std::string name, Scalar value) {
        for (auto& [n, v] : values_) {
            if (n == name) {
                v = std::move(value);
                return *this;
            }
        }
        values_.emplace_back(std::move(name), std::move(value));
        return *this;
    }

    /// Stores a structured payload (CBOR-encoded); read it back with
    /// Simulation::get_complex_json.
    ReplicateOutput& attach_complex(const Json& payload) {
        const auto bytes = Json::to_cbor(payload);
        complex_ = Blob(bytes.begin(), bytes.end());
        return *this;
    }
    ReplicateOutput& attach_complex_bytes(Blob bytes) {
        complex_ = std::move(bytes);
        return *this;
    }

    const std::vector<std::pair<std::string, Scalar>>& values() const noexcept { return values_; }
    const std::optional<Blob>& complex() const noexcept { return complex_; }

private:
    std::vector<std::pair<std::string, Scalar>> values_;
    std::optional<Blob> complex_;
};

/// Worker-local store of batch block results, keyed by (batch_id, block).
class BatchCache {
public:
    const std::any* find(std::uint64_t batch_id, std::uint64_t block) const {
        auto it = values_.find({batch_id, block});
        return it == values_.end() ? nullptr : &it->second;
    }

    void store(std::uint64_t batch_id, std::uint64_t block, std::any value) {
        values_.emplace(std::make_pair(batch_id, block), std::move(value));
    }

    /// Records how many blocks a successful replicate of the batch executed;
    /// false when it disagrees with an earlier member.
    bool check_block_count(std::uint64_t batch_id, std::uint64_t count) {
        auto [it, inserted] = block_counts_.emplace(batch_id, count);
        return inserted || it->second == count;
    }

private:
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::any> values_;
    std::map<std::uint64_t, std::uint64_t> block_counts_;
};

/// Handle a script receives: its level values, its own random stream, batch
/// sharing and warning emission.
class ScriptContext {
public:
    /// Detached context, e.g. to try a script by hand. batch() is not
    /// available on it.
    ScriptContext(const LevelCombo& levels, ReplicateId id, std::uint64_t seed)
        : levels_(levels), id_(id), rng_(seed) {}

    /// Context bound to a worker's batch cache.
    ScriptContext(const LevelCombo& levels, ReplicateId id, std::uint64_t global_seed,
                  const std::vector<std::string>& batch_names, BatchCache& cache)
        : levels_(levels),
          id_(id),
          rng_(derive_seed(global_seed, StreamKey::replicate(levels, id.rep_id))),
          global_seed_(global_seed),
          batch_names_(&batch_names),
          cache_(&cache) {}

    ScriptContext(const ScriptContext&) = delete;
    ScriptContext& operator=(const ScriptContext&) = delete;

    const LevelCombo& levels() const noexcept { return levels_; }
    const ReplicateId& id() const noexcept { return id_; }
    RngStream& rng() noexcept { return rng_; }

    /// Runs `block(stream)` once per batch and hands every other member of
    /// the batch the cached value. The block gets its own stream keyed by
    /// the batch levels, rep_id and block index, so the replicate stream is
    /// the same whether the value was computed or served from cache. Blocks
    /// must only produce a value.
    template <class F>
    std::invoke_result_t<F, RngStream&> batch(F&& block) {
        using R = std::invoke_result_t<F, RngStream&>;
        static_assert(!std::is_void_v<R>, "a batch block must return the shared value");
        if (!cache_) throw UsageError("batch() can only be called from a script run by the engine");
        const std::uint64_t index = ++blocks_used_;
        if (const std::any* hit = cache_->find(id_.batch_id, index)) {
            if (const R* value = std::any_cast<R>(hit)) return *value;
            throw ScriptError("batch block " + std::to_string(index) + " returned a different type than in batch " +
                                  std::to_string(id_.batch_id),
                              "batch()");
        }
        RngStream stream(derive_seed(global_seed_, StreamKey::batch(levels_, *batch_names_, id_.rep_id, index)));
        R value = std::invoke(std::forward<F>(block), stream);
        cache_->store(id_.batch_id, index, value);
        return value;
    }

    void warn(std::string message) { warnings_.push_back(std::move(message)); }

    const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    std::uint64_t blocks_used() const noexcept { return blocks_used_; }

private:
    const LevelCombo& levels_;
    ReplicateId id_;
    RngStream rng_;
    std::uint64_t global_seed_ = 0;
    const std::vector<std::string>* batch_names_ = nullptr;
    BatchCache* cache_ = nullptr;
    std::uint64_t blocks_used_ = 0;
    std::vector<std::string> warnings_;
};

using Script = std::function<ReplicateOutput(ScriptContext&)>;

}  // namespace simengine
