#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "simengine/errors.hpp"
#include "simengine/levels.hpp"

namespace simengine {

struct SimConfig {
    std::uint64_t num_sim = 1;
    std::uint64_t seed = 0;
    bool parallel = false;
    /// Unset means "auto": available cores minus one, at least one.
    std::optional<std::size_t> n_workers;
    bool stop_at_error = false;
    /// Unset: every replicate is its own batch and batch blocks never share.
    std::optional<std::vector<std::string>> batch_levels;
    bool return_batch_id = false;

    bool uses_batches() const noexcept { return batch_levels.has_value(); }

    /// Names that define a batch; unset batch_levels means all variables.
    std::vector<std::string> batch_names(const LevelSchema& schema) const {
        return batch_levels ? *batch_levels : schema.names();
    }

    std::size_t resolved_workers() const {
        if (n_workers) return *n_workers;
        const unsigned cores = std::thread::hardware_concurrency();
        return cores > 1 ? cores - 1 : 1;
    }

    void validate(const LevelSchema& schema) const {
        if (num_sim == 0) throw ConfigError("num_sim must be at least 1");
        if (n_workers && *n_workers == 0) throw ConfigError("n_workers must be at least 1");
        if (batch_levels) {
            for (const auto& name : *batch_levels)
                if (!schema.has(name))
                    throw ConfigError("batch_levels names unknown level '" + name + "'");
        }
    }

    bool operator==(const SimConfig&) const = default;
};

}  // namespace simengine
