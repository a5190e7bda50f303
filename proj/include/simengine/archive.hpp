#pragma once

// On-disk archive of a SimulationState:
//
//   <archive>/manifest.json    format_version, schema, configs, plan, timestamps
//   <archive>/results.jsonl    one record per result row
//   <archive>/errors.jsonl     one record per error row
//   <archive>/warnings.jsonl   one record per warning row
//   <archive>/runtimes.jsonl   per-row runtimes (kept apart so the three
//                              record files are identical across run modes)
//   <archive>/complex/<uid>    raw complex payload bytes
//
// Records are flat JSON objects: sim_uid, level_id, rep_id, batch_id, the
// level columns, then outputs (results) or message and call (errors and
// warnings). Writing is canonical, so save(load(a)) reproduces a byte for
// byte.
//
// The cluster handoff files live in <dir>/sim_results:
//   r_<tid>  JSON lines, {"table":"result",...,"outputs":{...}} and
//            {"table":"warning",...,"message":...,"call":...}
//   e_<tid>  JSON lines of error rows
//   c_<tid>  CBOR map from sim_uid (decimal string) to payload bytes

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "simengine/executor.hpp"
#include "simengine/json_io.hpp"
#include "simengine/state.hpp"

namespace simengine::archive {

namespace fs = std::filesystem;

inline constexpr const char* kFormatVersion = "1.0";
inline constexpr int kFormatMajor = 1;

// ---- file helpers ---------------------------------------------------------

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArchiveError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ArchiveError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) throw ArchiveError("error while writing " + path.string());
}

/// Temp file in the same directory, then rename over the target.
inline void write_file_atomic(const fs::path& path, const std::string& bytes) {
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    write_file(tmp, bytes);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw ArchiveError("cannot move " + tmp.string() + " into place");
    }
}

/// Calls fn(line_number, json) for each non-empty line; parse and decode
/// failures are reported with file name and line number.
template <class F>
void for_each_record(const fs::path& path, F&& fn) {
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            fn(Json::parse(line));
        } catch (const Json::exception& e) {
            throw ArchiveError(path.filename().string() + " line " + std::to_string(number) + ": " + e.what());
        } catch (const Error& e) {
            throw ArchiveError(path.filename().string() + " line " + std::to_string(number) + ": " + e.what());
        }
    }
}

// ---- encoders ---------------------------------------------------------------

inline Json config_to_json(const SimConfig& c) {
    Json j = Json::object();
    j["num_sim"] = c.num_sim;
    j["seed"] = c.seed;
    j["parallel"] = c.parallel;
    j["n_workers"] = c.n_workers ? Json(*c.n_workers) : Json(nullptr);
    j["stop_at_error"] = c.stop_at_error;
    j["batch_levels"] = c.batch_levels ? Json(*c.batch_levels) : Json(nullptr);
    j["return_batch_id"] = c.return_batch_id;
    return j;
}

inline SimConfig config_from_json(const Json& j) {
    SimConfig c;
    c.num_sim = j.at("num_sim").get<std::uint64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.parallel = j.at("parallel").get<bool>();
    if (!j.at("n_workers").is_null()) c.n_workers = j["n_workers"].get<std::size_t>();
    c.stop_at_error = j.at("stop_at_error").get<bool>();
    if (!j.at("batch_levels").is_null()) c.batch_levels = j["batch_levels"].get<std::vector<std::string>>();
    c.return_batch_id = j.at("return_batch_id").get<bool>();
    return c;
}

inline Json schema_to_json(const LevelSchema& schema) {
    Json out = Json::array();
    for (const auto& var : schema.variables()) {
        Json values = Json::array();
        for (const auto& v : var.values) values.push_back(v.to_json());
        Json j = Json::object();
        j["name"] = var.name;
        j["values"] = std::move(values);
        out.push_back(std::move(j));
    }
    return out;
}

inline LevelSchema schema_from_json(const Json& j) {
    LevelSchema schema;
    for (const auto& var : j) {
        std::vector<LevelValue> values;
        for (const auto& v : var.at("values")) values.push_back(LevelValue::from_json(v));
        schema.add(var.at("name").get<std::string>(), std::move(values));
    }
    return schema;
}

inline Json combos_to_json(const std::vector<LevelCombo>& combos) {
    Json out = Json::array();
    for (const auto& c : combos) {
        Json assignments = Json::object();
        for (const auto& [name, value] : c.assignments) assignments[name] = value.to_json();
        Json j = Json::object();
        j["level_id"] = c.level_id;
        j["assignments"] = std::move(assignments);
        out.push_back(std::move(j));
    }
    return out;
}

inline std::vector<LevelCombo> combos_from_json(const Json& j) {
    std::vector<LevelCombo> out;
    for (const auto& c : j) {
        LevelCombo combo;
        combo.level_id = c.at("level_id").get<std::uint64_t>();
        for (const auto& [name, value] : c.at("assignments").items())
            combo.assignments.emplace_back(name, LevelValue::from_json(value));
        out.push_back(std::move(combo));
    }
    return out;
}

inline Json id_fields(const ReplicateId& id) {
    Json j = Json::object();
    j["sim_uid"] = id.sim_uid;
    j["level_id"] = id.level_id;
    j["rep_id"] = id.rep_id;
    j["batch_id"] = id.batch_id;
    return j;
}

inline ReplicateId id_from_json(const Json& j) {
    return {j.at("sim_uid").get<std::uint64_t>(), j.at("level_id").get<std::uint64_t>(),
            j.at("rep_id").get<std::uint64_t>(), j.at("batch_id").get<std::uint64_t>()};
}

/// Identity plus level columns, as in the on-disk tables.
inline Json row_prefix(const Plan& plan, const ReplicateId& id) {
    Json j = id_fields(id);
    for (const auto& [name, value] : plan.combo(id.level_id).assignments) j[name] = value.column_value().to_json();
    return j;
}

inline std::string result_record(const Plan& plan, const ResultRow& row) {
    Json j = row_prefix(plan, row.id);
    for (const auto& [name, value] : row.outputs) j[name] = value.to_json();
    return to_canonical_json(j);
}

inline std::string message_record(const Plan& plan, const MessageRow& row) {
    Json j = row_prefix(plan, row.id);
    j["message"] = row.message;
    j["call"] = row.call;
    return to_canonical_json(j);
}

/// Record file contents of each table, exactly as save() writes them.
inline std::string results_text(const SimulationState& s) {
    std::string out;
    for (const auto& r : s.results) out += result_record(s.plan, r) + '\n';
    return out;
}

inline std::string errors_text(const SimulationState& s) {
    std::string out;
    for (const auto& r : s.errors) out += message_record(s.plan, r) + '\n';
    return out;
}

inline std::string warnings_text(const SimulationState& s) {
    std::string out;
    for (const auto& r : s.warnings) out += message_record(s.plan, r) + '\n';
    return out;
}

inline Json manifest(const SimulationState& s) {
    Json m = Json::object();
    m["format_version"] = kFormatVersion;
    m["seed"] = s.config.seed;
    m["created_at"] = s.created_at;
    m["start_time"] = s.start_time;
    m["end_time"] = s.end_time;
    m["total_runtime"] = s.total_runtime;
    m["config"] = config_to_json(s.config);
    m["run_config"] = s.run_config ? config_to_json(*s.run_config) : Json(nullptr);
    m["schema"] = schema_to_json(s.schema);
    m["uid_counter"] = s.plan.uid_counter;
    m["combos"] = combos_to_json(s.plan.combos);
    Json plan = Json::array();
    for (const auto& r : s.plan.replicates) plan.push_back(Json::array({r.sim_uid, r.level_id, r.rep_id, r.batch_id}));
    m["plan"] = std::move(plan);
    Json complex = Json::array();
    for (const auto& [uid, blob] : s.complex_store) complex.push_back(uid);
    m["complex"] = std::move(complex);
    return m;
}

// ---- save / load ----------------------------------------------------------

inline void write_contents(const SimulationState& s, const fs::path& dir) {
    fs::create_directories(dir / "complex");
    write_file(dir / "manifest.json", to_canonical_json(manifest(s), 2) + '\n');
    write_file(dir / "results.jsonl", results_text(s));
    write_file(dir / "errors.jsonl", errors_text(s));
    write_file(dir / "warnings.jsonl", warnings_text(s));
    std::string runtimes;
    auto add = [&](const char* table, const ReplicateId& id, double runtime) {
        Json j = Json::object();
        j["table"] = table;
        j["sim_uid"] = id.sim_uid;
        j["runtime"] = runtime;
        runtimes += to_canonical_json(j) + '\n';
    };
    for (const auto& r : s.results) add("results", r.id, r.runtime);
    for (const auto& r : s.errors) add("errors", r.id, r.runtime);
    for (const auto& r : s.warnings) add("warnings", r.id, r.runtime);
    write_file(dir / "runtimes.jsonl", runtimes);
    for (const auto& [uid, blob] : s.complex_store) write_file(dir / "complex" / std::to_string(uid), blob);
}

/// Writes into a sibling temp directory and swaps it into place, so a crash
/// never leaves a half-written archive under `path`.
inline void save(const SimulationState& s, const fs::path& path) {
    const fs::path target = fs::absolute(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const std::string suffix = "." + std::to_string(::getpid());
    fs::path tmp = target;
    tmp += ".saving" + suffix;
    fs::path old = target;
    old += ".old" + suffix;
    fs::remove_all(tmp);
    write_contents(s, tmp);
    std::error_code ec;
    if (fs::exists(target)) {
        if (!fs::is_directory(target) || !fs::exists(target / "manifest.json")) {
            fs::remove_all(tmp);
            throw ArchiveError(target.string() + " exists and is not an archive");
        }
        fs::rename(target, old, ec);
        if (ec) throw ArchiveError("cannot replace " + target.string() + ": " + ec.message());
    }
    fs::rename(tmp, target, ec);
    if (ec) throw ArchiveError("cannot move archive into " + target.string() + ": " + ec.message());
    fs::remove_all(old, ec);
}

inline void check_version(const Json& m) {
    if (!m.contains("format_version") || !m["format_version"].is_string())
        throw ArchiveError("manifest has no format_version");
    const auto& v = m["format_version"].get_ref<const std::string&>();
    int major = 0;
    try {
        major = std::stoi(v.substr(0, v.find('.')));
    } catch (const std::exception&) {
        throw ArchiveError("malformed format_version '" + v + "'");
    }
    if (major != kFormatMajor) throw ArchiveError("unsupported version " + v + " (this build reads 1.x)");
}

inline SimulationState load(const fs::path& path) {
    if (!fs::is_directory(path)) throw ArchiveError("no archive at " + path.string());
    const fs::path mpath = path / "manifest.json";
    if (!fs::exists(mpath)) throw ArchiveError("no manifest.json in " + path.string());
    Json m;
    try {
        m = Json::parse(read_file(mpath));
    } catch (const Json::exception& e) {
        throw ArchiveError("manifest.json: " + std::string(e.what()));
    }
    check_version(m);

    SimulationState s;
    try {
        s.created_at = m.at("created_at").get<std::string>();
        s.start_time = m.at("start_time").get<std::string>();
        s.end_time = m.at("end_time").get<std::string>();
        s.total_runtime = decode_double(m.at("total_runtime"));
        s.config = config_from_json(m.at("config"));
        if (!m.at("run_config").is_null()) s.run_config = config_from_json(m["run_config"]);
        s.schema = schema_from_json(m.at("schema"));
        s.plan.uid_counter = m.at("uid_counter").get<std::uint64_t>();
        s.plan.combos = combos_from_json(m.at("combos"));
        for (const auto& r : m.at("plan")) {
            if (!r.is_array() || r.size() != 4) throw ArchiveError("malformed plan entry " + r.dump());
            s.plan.replicates.push_back(
                {r[0].get<std::uint64_t>(), r[1].get<std::uint64_t>(), r[2].get<std::uint64_t>(), r[3].get<std::uint64_t>()});
        }
        for (const auto& uid : m.at("complex")) {
            const auto u = uid.get<std::uint64_t>();
            const fs::path blob = path / "complex" / std::to_string(u);
            if (!fs::exists(blob)) throw ArchiveError("missing complex payload for sim_uid " + std::to_string(u));
            s.complex_store[u] = read_file(blob);
        }
    } catch (const Json::exception& e) {
        throw ArchiveError("manifest.json: " + std::string(e.what()));
    }

    std::set<std::string> fixed{"sim_uid", "level_id", "rep_id", "batch_id"};
    for (const auto& n : s.schema.names()) fixed.insert(n);
    for_each_record(path / "results.jsonl", [&](const Json& j) {
        ResultRow row;
        row.id = id_from_json(j);
        for (const auto& [key, value] : j.items())
            if (!fixed.count(key)) row.outputs.emplace_back(key, Scalar::from_json(value));
        s.results.push_back(std::move(row));
    });
    auto read_messages = [&](const char* file, std::vector<MessageRow>& rows) {
        for_each_record(path / file, [&](const Json& j) {
            rows.push_back({id_from_json(j), 0.0, j.at("message").get<std::string>(), j.at("call").get<std::string>()});
        });
    };
    read_messages("errors.jsonl", s.errors);
    read_messages("warnings.jsonl", s.warnings);

    std::map<std::pair<std::string, std::uint64_t>, double> runtimes;
    for_each_record(path / "runtimes.jsonl", [&](const Json& j) {
        runtimes[{j.at("table").get<std::string>(), j.at("sim_uid").get<std::uint64_t>()}] = decode_double(j.at("runtime"));
    });
    auto attach = [&](const char* table, auto& rows) {
        for (auto& r : rows) {
            auto it = runtimes.find({table, r.id.sim_uid});
            if (it != runtimes.end()) r.runtime = it->second;
        }
    };
    attach("results", s.results);
    attach("errors", s.errors);
    attach("warnings", s.warnings);

    for (const auto& r : s.plan.replicates)
        if (!s.plan.has_level(r.level_id))
            throw ArchiveError("plan refers to unknown level id " + std::to_string(r.level_id));
    s.check_partition();
    return s;
}

// ---- cluster task files ---------------------------------------------------

inline fs::path results_dir(const fs::path& dir) { return dir / "sim_results"; }

inline fs::path task_file(const fs::path& dir, char kind, std::uint64_t tid) {
    return results_dir(dir) / (std::string(1, kind) + "_" + std::to_string(tid));
}

/// Writes the files of one array task. r_<tid> is always written, and
/// written last, so its presence marks a finished task.
inline void write_task_files(const fs::path& dir, std::uint64_t tid, const std::vector<ReplicateOutcome>& outcomes) {
    fs::create_directories(results_dir(dir));
    std::string r_text, e_text;
    Json complex = Json::object();
    for (const auto& o : outcomes) {
        if (o.result) {
            Json j = Json::object();
            j["table"] = "result";
            j.update(id_fields(o.id));
            j["runtime"] = o.result->runtime;
            Json outputs = Json::object();
            for (const auto& [name, value] : o.result->outputs) outputs[name] = value.to_json();
            j["outputs"] = std::move(outputs);
            r_text += to_canonical_json(j) + '\n';
        }
        if (o.warning) {
            Json j = Json::object();
            j["table"] = "warning";
            j.update(id_fields(o.id));
            j["runtime"] = o.warning->runtime;
            j["message"] = o.warning->message;
            j["call"] = o.warning->call;
            r_text += to_canonical_json(j) + '\n';
        }
        if (o.error) {
            Json j = id_fields(o.id);
            j["runtime"] = o.error->runtime;
            j["message"] = o.error->message;
            j["call"] = o.error->call;
            e_text += to_canonical_json(j) + '\n';
        }
        if (o.complex)
            complex[std::to_string(o.id.sim_uid)] =
                Json::binary(std::vector<std::uint8_t>(o.complex->begin(), o.complex->end()));
    }
    if (!complex.empty()) {
        const auto bytes = Json::to_cbor(complex);
        write_file_atomic(task_file(dir, 'c', tid), std::string(bytes.begin(), bytes.end()));
    }
    if (!e_text.empty()) write_file_atomic(task_file(dir, 'e', tid), e_text);
    write_file_atomic(task_file(dir, 'r', tid), r_text);
}

/// Compiles the files of tasks 1..n_tasks. A task counts as present when its
/// r_ or e_ file exists; absent tasks are listed in one ProtocolError.
inline std::vector<ReplicateOutcome> read_task_files(const fs::path& dir, std::uint64_t n_tasks) {
    std::vector<std::uint64_t> missing;
    for (std::uint64_t tid = 1; tid <= n_tasks; ++tid)
        if (!fs::exists(task_file(dir, 'r', tid)) && !fs::exists(task_file(dir, 'e', tid))) missing.push_back(tid);
    if (!missing.empty()) {
        std::string list;
        for (auto tid : missing) list += (list.empty() ? "" : ", ") + std::to_string(tid);
        throw ProtocolError("missing output of task id" + std::string(missing.size() > 1 ? "s " : " ") + list);
    }

    std::map<std::uint64_t, ReplicateOutcome> merged;
    std::map<std::uint64_t, std::uint64_t> owner;
    auto slot = [&](const ReplicateId& id, std::uint64_t tid) -> ReplicateOutcome& {
        auto [it, inserted] = owner.emplace(id.sim_uid, tid);
        if (!inserted && it->second != tid)
            throw ArchiveError("sim_uid " + std::to_string(id.sim_uid) + " appears in the files of tasks " +
                               std::to_string(it->second) + " and " + std::to_string(tid));
        auto& o = merged[id.sim_uid];
        o.id = id;
        return o;
    };
    auto duplicate = [](const ReplicateId& id, const char* what) {
        return ArchiveError("sim_uid " + std::to_string(id.sim_uid) + " has more than one " + what + " record");
    };

    for (std::uint64_t tid = 1; tid <= n_tasks; ++tid) {
        const fs::path r = task_file(dir, 'r', tid);
        if (fs::exists(r)) {
            for_each_record(r, [&](const Json& j) {
                const ReplicateId id = id_from_json(j);
                auto& o = slot(id, tid);
                const auto table = j.at("table").get<std::string>();
                const double runtime = decode_double(j.at("runtime"));
                if (table == "result") {
                    if (o.result) throw duplicate(id, "result");
                    ResultRow row{id, runtime, {}};
                    for (const auto& [name, value] : j.at("outputs").items())
                        row.outputs.emplace_back(name, Scalar::from_json(value));
                    o.result = std::move(row);
                } else if (table == "warning") {
                    if (o.warning) throw duplicate(id, "warning");
                    o.warning = MessageRow{id, runtime, j.at("message").get<std::string>(), j.at("call").get<std::string>()};
                } else {
                    throw ArchiveError("unknown table '" + table + "'");
                }
            });
        }
        const fs::path e = task_file(dir, 'e', tid);
        if (fs::exists(e)) {
            for_each_record(e, [&](const Json& j) {
                const ReplicateId id = id_from_json(j);
                auto& o = slot(id, tid);
                if (o.error) throw duplicate(id, "error");
                o.error = MessageRow{id, decode_double(j.at("runtime")), j.at("message").get<std::string>(),
                                     j.at("call").get<std::string>()};
            });
        }
        const fs::path c = task_file(dir, 'c', tid);
        if (fs::exists(c)) {
            const std::string bytes = read_file(c);
            Json j;
            try {
                j = Json::from_cbor(std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
            } catch (const Json::exception& ex) {
                throw ArchiveError(c.filename().string() + ": " + ex.what());
            }
            for (const auto& [key, value] : j.items()) {
                const std::uint64_t uid = std::stoull(key);
                auto it = merged.find(uid);
                if (it == merged.end() || owner[uid] != tid)
                    throw ArchiveError(c.filename().string() + ": payload for sim_uid " + key +
                                       " without a record of this task");
                const auto& bin = value.get_binary();
                it->second.complex = Blob(bin.begin(), bin.end());
            }
        }
    }

    std::vector<ReplicateOutcome> out;
    out.reserve(merged.size());
    for (auto& [uid, o] : merged) {
        if (o.result && o.error)
            throw ArchiveError("sim_uid " + std::to_string(uid) + " has both a result and an error record");
        if (!o.result && !o.error)
            throw ArchiveError("sim_uid " + std::to_string(uid) + " has a warning but neither a result nor an error");
        out.push_back(std::move(o));
    }
    return out;
}

}  // namespace simengine::archive
