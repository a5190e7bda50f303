#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "simengine/errors.hpp"
#include "simengine/value.hpp"

namespace simengine {

struct LevelVariable {
    std::string name;
    std::vector<LevelValue> values;

    bool operator==(const LevelVariable&) const = default;
};

/// Declared simulation levels, in declaration order.
class LevelSchema {
public:
    LevelSchema() = default;

    LevelSchema& add(std::string name, std::vector<LevelValue> values) {
        variables_.push_back({std::move(name), std::move(values)});
        return *this;
    }
    LevelSchema& add(std::string name, std::initializer_list<LevelValue> values) {
        return add(std::move(name), std::vector<LevelValue>(values));
    }

    const std::vector<LevelVariable>& variables() const noexcept { return variables_; }
    bool empty() const noexcept { return variables_.empty(); }

    bool has(std::string_view name) const {
        return std::any_of(variables_.begin(), variables_.end(),
                           [&](const auto& v) { return v.name == name; });
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& v : variables_) out.push_back(v.name);
        return out;
    }

    std::size_t combo_count() const {
        std::size_t n = 1;
        for (const auto& v : variables_) n *= v.values.size();
        return n;
    }

    void validate() const {
        std::set<std::string> seen;
        for (const auto& var : variables_) {
            if (var.name.empty()) throw SchemaError("level names must be non-empty");
            if (!seen.insert(var.name).second)
                throw SchemaError("duplicate level name '" + var.name + "'");
            if (var.values.empty())
                throw SchemaError("level '" + var.name + "' has no values");
            std::set<std::string> labels;
            for (const auto& value : var.values) {
                if (value.kind() == LevelKind::structured && value.as_structured().label.empty())
                    throw SchemaError("structured values of level '" + var.name +
                                      "' need a non-empty label");
                if (!labels.insert(value.label()).second)
                    throw SchemaError("duplicate value '" + value.label() + "' in level '" +
                                      var.name + "'");
            }
        }
    }

    bool operator==(const LevelSchema&) const = default;

private:
    std::vector<LevelVariable> variables_;
};

/// One point of the level cross-product. Assignments keep declaration order.
struct LevelCombo {
    std::uint64_t level_id = 0;
    std::vector<std::pair<std::string, LevelValue>> assignments;

    const LevelValue* find(std::string_view name) const {
        for (const auto& [n, v] : assignments)
            if (n == name) return &v;
        return nullptr;
    }

    const LevelValue& at(std::string_view name) const {
        if (auto v = find(name)) return *v;
        throw UsageError("unknown level '" + std::string(name) + "'");
    }
    const LevelValue& operator[](std::string_view name) const { return at(name); }

    double number(std::string_view name) const { return at(name).as_number(); }
    std::int64_t integer(std::string_view name) const { return at(name).as_integer(); }
    const std::string& text(std::string_view name) const { return at(name).as_text(); }
    bool flag(std::string_view name) const { return at(name).as_flag(); }
    const Structured& structured(std::string_view name) const { return at(name).as_structured(); }

    /// Deep value equality of the assignments, ignoring order and level_id.
    bool same_values(const LevelCombo& other) const {
        if (assignments.size() != other.assignments.size()) return false;
        for (const auto& [name, value] : assignments) {
            auto v = other.find(name);
            if (!v || !(*v == value)) return false;
        }
        return true;
    }

    bool operator==(const LevelCombo&) const = default;
};

/// Cross-product of the schema with 1-based ids; the first-declared variable
/// varies fastest.
inline std::vector<LevelCombo> enumerate_combos(const LevelSchema& schema) {
    schema.validate();
    const auto& vars = schema.variables();
    const std::size_t total = schema.combo_count();
    std::vector<LevelCombo> combos;
    combos.reserve(total);
    std::vector<std::size_t> index(vars.size(), 0);
    for (std::size_t k = 0; k < total; ++k) {
        LevelCombo combo;
        combo.level_id = k + 1;
        for (std::size_t v = 0; v < vars.size(); ++v)
            combo.assignments.emplace_back(vars[v].name, vars[v].values[index[v]]);
        combos.push_back(std::move(combo));
        for (std::size_t v = 0; v < vars.size(); ++v) {
            if (++index[v] < vars[v].values.size()) break;
            index[v] = 0;
        }
    }
    return combos;
}

/// Name-sorted "<name>=<value>;" text over the selected variables. Used for
/// RNG stream keys and batch keys, so it does not depend on declaration order.
inline std::string canonical_assignments(const LevelCombo& combo,
                                         const std::vector<std::string>& names) {
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end());
    std::string out;
    for (const auto& name : sorted) {
        out += json_quote(name);
        out += '=';
        out += combo.at(name).canonical();
        out += ';';
    }
    return out;
}

inline std::vector<std::string> assignment_names(const LevelCombo& combo) {
    std::vector<std::string> names;
    for (const auto& [n, v] : combo.assignments) names.push_back(n);
    return names;
}

}  // namespace simengine
