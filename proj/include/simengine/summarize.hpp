#pragma once

// Per-level-combo summaries with Monte Carlo standard errors.
//
// For estimates t_1..t_n of a target theta (n = values used):
//   mean      mean(t),               MCSE = S / sqrt(n)
//   bias      mean(t - theta),       MCSE = S / sqrt(n)
//   mse       mean((t - theta)^2),   MCSE = sqrt(sum(((t - theta)^2 - mse)^2) / (n (n - 1)))
//   coverage  share of intervals containing theta, MCSE = sqrt(p (1 - p) / n)
//   median (lower middle value for even n), var = S^2, sd = S
// S is the sample SD (divisor n - 1). CI bounds are value -/+ z * MCSE with
// z = 1.959964. Missing or non-finite inputs are left out per statistic and
// counted in Table::notes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "simengine/json_io.hpp"
#include "simengine/state.hpp"
#include "simengine/table.hpp"

namespace simengine {

inline constexpr double kZ975 = 1.959964;

enum class Stat { mean, median, var, sd, bias, mse, coverage };

inline const char* stat_name(Stat s) {
    switch (s) {
    case Stat::mean: return "mean";
    case Stat::median: return "median";
    case Stat::var: return "var";
    case Stat::sd: return "sd";
    case Stat::bias: return "bias";
    case Stat::mse: return "mse";
    case Stat::coverage: return "coverage";
    }
    return "?";
}

/// A target value: a constant or the name of a results column.
using Truth = std::variant<double, std::string>;

struct SummarySpec {
    Stat stat = Stat::mean;
    std::string name;
    std::string x;         // mean, median, var, sd
    std::string estimate;  // bias, mse, coverage
    Truth truth = 0.0;     // bias, mse, coverage
    std::string se;        // coverage from estimate and standard error
    std::string lower;     // coverage from interval bounds
    std::string upper;

    static SummarySpec of(Stat stat, std::string name, std::string x) {
        SummarySpec s;
        s.stat = stat;
        s.name = std::move(name);
        s.x = std::move(x);
        return s;
    }
    static SummarySpec mean(std::string name, std::string x) { return of(Stat::mean, std::move(name), std::move(x)); }
    static SummarySpec median(std::string name, std::string x) { return of(Stat::median, std::move(name), std::move(x)); }
    static SummarySpec var(std::string name, std::string x) { return of(Stat::var, std::move(name), std::move(x)); }
    static SummarySpec sd(std::string name, std::string x) { return of(Stat::sd, std::move(name), std::move(x)); }

    static SummarySpec bias(std::string name, std::string estimate, Truth truth) {
        SummarySpec s;
        s.stat = Stat::bias;
        s.name = std::move(name);
        s.estimate = std::move(estimate);
        s.truth = std::move(truth);
        return s;
    }
    static SummarySpec mse(std::string name, std::string estimate, Truth truth) {
        SummarySpec s = bias(std::move(name), std::move(estimate), std::move(truth));
        s.stat = Stat::mse;
        return s;
    }
    /// Covered when |estimate - truth| <= z * se.
    static SummarySpec coverage(std::string name, std::string estimate, std::string se, Truth truth) {
        SummarySpec s = bias(std::move(name), std::move(estimate), std::move(truth));
        s.stat = Stat::coverage;
        s.se = std::move(se);
        return s;
    }
    /// Covered when lower <= truth <= upper.
    static SummarySpec coverage_interval(std::string name, std::string lower, std::string upper, Truth truth) {
        SummarySpec s;
        s.stat = Stat::coverage;
        s.name = std::move(name);
        s.lower = std::move(lower);
        s.upper = std::move(upper);
        s.truth = std::move(truth);
        return s;
    }

    bool interval_form() const { return stat == Stat::coverage && !lower.empty(); }
    bool has_mc_se() const {
        return stat == Stat::mean || stat == Stat::bias || stat == Stat::mse || stat == Stat::coverage;
    }

    std::vector<std::string> inputs() const {
        std::vector<std::string> cols;
        switch (stat) {
        case Stat::mean:
        case Stat::median:
        case Stat::var:
        case Stat::sd:
            cols = {x};
            break;
        case Stat::bias:
        case Stat::mse:
            cols = {estimate};
            break;
        case Stat::coverage:
            cols = interval_form() ? std::vector<std::string>{lower, upper} : std::vector<std::string>{estimate, se};
            break;
        }
        if (stat == Stat::bias || stat == Stat::mse || stat == Stat::coverage)
            if (auto col = std::get_if<std::string>(&truth)) cols.push_back(*col);
        return cols;
    }
};

namespace detail {

struct Estimate {
    double value = std::nan("");
    std::optional<double> mc_se;
};

inline double sample_sd(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double average(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// `cols` holds, per used replicate, the spec's inputs in inputs() order.
inline Estimate compute(const SummarySpec& spec, const std::vector<std::vector<double>>& cols, bool mc_se) {
    const std::size_t n = cols.size();
    Estimate e;
    if (n == 0) return e;
    auto need_two = [&](const char* what) {
        if (n < 2)
            throw SummaryError("'" + spec.name + "': " + what + " needs at least 2 values, found " + std::to_string(n));
    };
    auto truth_of = [&](const std::vector<double>& row) {
        if (auto c = std::get_if<double>(&spec.truth)) return *c;
        return row.back();
    };

    switch (spec.stat) {
    case Stat::mean: {
        std::vector<double> v;
        for (const auto& r : cols) v.push_back(r[0]);
        e.value = average(v);
        if (mc_se) {
            need_two("the MC SE of a mean");
            e.mc_se = sample_sd(v) / std::sqrt(static_cast<double>(n));
        }
        break;
    }
    case Stat::median: {
        std::vector<double> v;
        for (const auto& r : cols) v.push_back(r[0]);
        std::sort(v.begin(), v.end());
        e.value = v[(n - 1) / 2];
        break;
    }
    case Stat::var:
    case Stat::sd: {
        need_two(spec.stat == Stat::var ? "a variance" : "a standard deviation");
        std::vector<double> v;
        for (const auto& r : cols) v.push_back(r[0]);
        const double s = sample_sd(v);
        e.value = spec.stat == Stat::var ? s * s : s;
        break;
    }
    case Stat::bias: {
        std::vector<double> d;
        for (const auto& r : cols) d.push_back(r[0] - truth_of(r));
        e.value = average(d);
        if (mc_se) {
            need_two("the MC SE of a bias");
            e.mc_se = sample_sd(d) / std::sqrt(static_cast<double>(n));
        }
        break;
    }
    case Stat::mse: {
        std::vector<double> sq;
        for (const auto& r : cols) {
            const double d = r[0] - truth_of(r);
            sq.push_back(d * d);
        }
        e.value = average(sq);
        if (mc_se) {
            need_two("the MC SE of an MSE");
            double ss = 0.0;
            for (double s : sq) ss += (s - e.value) * (s - e.value);
            e.mc_se = std::sqrt(ss / (static_cast<double>(n) * static_cast<double>(n - 1)));
        }
        break;
    }
    case Stat::coverage: {
        std::size_t covered = 0;
        for (const auto& r : cols) {
            const double theta = truth_of(r);
            const bool hit = spec.interval_form() ? (r[0] <= theta && theta <= r[1])
                                                  : std::abs(r[0] - theta) <= kZ975 * r[1];
            covered += hit;
        }
        const double p = static_cast<double>(covered) / static_cast<double>(n);
        e.value = p;
        if (mc_se) e.mc_se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
        break;
    }
    }
    return e;
}

inline void validate_specs(const SimulationState& s, const std::vector<SummarySpec>& specs) {
    std::set<std::string> taken{"level_id", "n_reps"};
    for (const auto& n : s.schema.names()) taken.insert(n);
    std::set<std::string> available;
    for (const auto& r : s.results)
        for (const auto& [name, value] : r.outputs) available.insert(name);

    for (const auto& spec : specs) {
        if (spec.name.empty()) throw SummaryError("every summary needs a name");
        for (const std::string& col : {spec.name, spec.name + "_mc_se", spec.name + "_mc_ci_l", spec.name + "_mc_ci_u"})
            if (!taken.insert(col).second) throw SummaryError("summary column name '" + col + "' is already in use");
        for (const auto& col : spec.inputs()) {
            if (col.empty())
                throw SummaryError("'" + spec.name + "' (" + stat_name(spec.stat) + ") is missing an input column");
            if (!s.results.empty() && !available.count(col))
                throw SummaryError("'" + spec.name + "' refers to unknown column '" + col + "'");
        }
    }
}

}  // namespace detail

/// One row per level combo with results: level_id, level columns, n_reps,
/// each spec's value, then (with mc_se) <name>_mc_se, <name>_mc_ci_l and
/// <name>_mc_ci_u for every spec that has an MC SE.
inline Table summarize(const SimulationState& s, const std::vector<SummarySpec>& specs, bool mc_se = false) {
    detail::validate_specs(s, specs);

    Table t;
    t.columns.push_back("level_id");
    for (const auto& n : s.schema.names()) t.columns.push_back(n);
    t.columns.push_back("n_reps");
    for (const auto& spec : specs) t.columns.push_back(spec.name);
    if (mc_se) {
        for (const auto& spec : specs) {
            if (!spec.has_mc_se()) continue;
            t.columns.push_back(spec.name + "_mc_se");
            t.columns.push_back(spec.name + "_mc_ci_l");
            t.columns.push_back(spec.name + "_mc_ci_u");
        }
    }

    std::map<std::uint64_t, std::vector<const ResultRow*>> groups;
    for (const auto& r : s.results) groups[r.id.level_id].push_back(&r);

    for (const auto& [level_id, rows] : groups) {
        std::vector<Scalar> out{level_id};
        for (const auto& [name, value] : s.plan.combo(level_id).assignments) out.push_back(value.column_value());
        out.emplace_back(rows.size());

        std::vector<detail::Estimate> estimates;
        for (const auto& spec : specs) {
            const auto inputs = spec.inputs();
            std::vector<std::vector<double>> cols;
            std::size_t excluded = 0;
            for (const ResultRow* r : rows) {
                std::vector<double> vals;
                bool ok = true;
                for (const auto& col : inputs) {
                    const Scalar* v = r->find(col);
                    if (v && v->is_text())
                        throw SummaryError("'" + spec.name + "': column '" + col + "' is not numeric");
                    const auto num = v ? v->to_number() : std::nullopt;
                    if (!num || !std::isfinite(*num)) {
                        ok = false;
                        break;
                    }
                    vals.push_back(*num);
                }
                if (ok) {
                    cols.push_back(std::move(vals));
                } else {
                    ++excluded;
                }
            }
            if (excluded)
                t.notes.push_back("'" + spec.name + "': " + std::to_string(excluded) +
                                  " missing or non-finite value(s) excluded at level_id " + std::to_string(level_id));
            estimates.push_back(detail::compute(spec, cols, mc_se && spec.has_mc_se()));
            out.emplace_back(estimates.back().value);
        }
        if (mc_se) {
            for (std::size_t i = 0; i < specs.size(); ++i) {
                if (!specs[i].has_mc_se()) continue;
                const auto& e = estimates[i];
                if (e.mc_se) {
                    out.emplace_back(*e.mc_se);
                    out.emplace_back(e.value - kZ975 * *e.mc_se);
                    out.emplace_back(e.value + kZ975 * *e.mc_se);
                } else {
                    out.insert(out.end(), 3, Scalar(std::nan("")));
                }
            }
        }
        t.rows.push_back(std::move(out));
    }
    return t;
}

// ---- spec files -------------------------------------------------------------

/// One JSON object per line, e.g.
///   {"stat":"mean","name":"power","x":"reject"}
///   {"stat":"mse","name":"lambda_mse","estimate":"lambda_hat","truth":20}
///   {"stat":"coverage","name":"cov","estimate":"b","se":"se","truth":10}
///   {"stat":"coverage","name":"cov","lower":"lo","upper":"hi","truth":"theta"}
/// Blank lines and lines starting with '#' are ignored.
inline std::vector<SummarySpec> parse_spec_lines(const std::string& text) {
    static const std::map<std::string, Stat> stats{{"mean", Stat::mean}, {"median", Stat::median}, {"var", Stat::var},
                                                   {"sd", Stat::sd},     {"bias", Stat::bias},     {"mse", Stat::mse},
                                                   {"coverage", Stat::coverage}};
    std::vector<SummarySpec> specs;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        auto fail = [&](const std::string& why) {
            return SummaryError("spec line " + std::to_string(number) + ": " + why);
        };
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw fail(e.what());
        }
        if (!j.is_object()) throw fail("expected a JSON object");
        auto text_field = [&](const char* key, bool required) -> std::string {
            if (!j.contains(key)) {
                if (required) throw fail(std::string("missing \"") + key + "\"");
                return {};
            }
            if (!j[key].is_string()) throw fail(std::string("\"") + key + "\" must be a string");
            return j[key].get<std::string>();
        };
        const std::string stat = text_field("stat", true);
        auto it = stats.find(stat);
        if (it == stats.end()) throw fail("unknown stat '" + stat + "'");
        SummarySpec spec;
        spec.stat = it->second;
        spec.name = text_field("name", true);
        auto truth = [&]() -> Truth {
            if (!j.contains("truth")) throw fail("missing \"truth\"");
            if (j["truth"].is_number()) return j["truth"].get<double>();
            if (j["truth"].is_string()) return j["truth"].get<std::string>();
            throw fail("\"truth\" must be a number or a column name");
        };
        switch (spec.stat) {
        case Stat::mean:
        case Stat::median:
        case Stat::var:
        case Stat::sd:
            spec.x = text_field("x", true);
            break;
        case Stat::bias:
        case Stat::mse:
            spec.estimate = text_field("estimate", true);
            spec.truth = truth();
            break;
        case Stat::coverage:
            if (j.contains("lower") || j.contains("upper")) {
                spec.lower = text_field("lower", true);
                spec.upper = text_field("upper", true);
            } else {
                spec.estimate = text_field("estimate", true);
                spec.se = text_field("se", true);
            }
            spec.truth = truth();
            break;
        }
        specs.push_back(std::move(spec));
    }
    return specs;
}

// ---- vars ---------------------------------------------------------------------

inline const std::vector<std::string>& var_names() {
    static const std::vector<std::string> names{"seed",       "total_runtime", "num_sim",   "n_level_combos",
                                                "start_time", "end_time",      "created_at", "uid_counter",
                                                "n_results",  "n_errors",      "n_warnings"};
    return names;
}

/// Simulation-wide variables (seed, total_runtime, num_sim, ...).
inline Json vars(const SimulationState& s, std::string_view name) {
    if (name == "seed") return s.config.seed;
    if (name == "total_runtime") return s.total_runtime;
    if (name == "num_sim") return s.config.num_sim;
    if (name == "n_level_combos") return s.has_run() ? s.plan.combos.size() : s.schema.combo_count();
    if (name == "start_time") return s.start_time;
    if (name == "end_time") return s.end_time;
    if (name == "created_at") return s.created_at;
    if (name == "uid_counter") return s.plan.uid_counter;
    if (name == "n_results") return s.results.size();
    if (name == "n_errors") return s.errors.size();
    if (name == "n_warnings") return s.warnings.size();
    std::string known;
    for (const auto& n : var_names()) known += (known.empty() ? "" : ", ") + n;
    throw NotFoundError("unknown variable '" + std::string(name) + "' (known: " + known + ")");
}

/// Plain text of a vars() value: strings bare, numbers as in the tables.
inline std::string vars_text(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return display_double(v.get<double>());
    return v.dump();
}

}  // namespace simengine
