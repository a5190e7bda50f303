#pragma once

// Canonical JSON text output. Parsing goes through nlohmann::json; writing is
// done here so that number formatting is pinned: doubles use the shortest
// decimal that round-trips (std::to_chars) and always carry a '.' or an
// exponent, so a re-parse keeps the float/integer distinction.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "simengine/errors.hpp"

namespace simengine {

using Json = nlohmann::ordered_json;

/// Shortest round-trip decimal for a finite double, e.g. 20.0 -> "20.0",
/// 0.1 -> "0.1", 1e21 -> "1e+21".
inline std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    std::string out(buf, res.ptr);
    if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
    return out;
}

/// Human-oriented number text: like format_double but without the ".0".
inline std::string display_double(double value) {
    if (std::isnan(value)) return "NA";
    if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

inline std::string json_quote(std::string_view text) {
    return Json(std::string(text)).dump(-1, ' ', false, Json::error_handler_t::replace);
}

namespace detail {

inline void newline(std::string& out, int indent, int depth) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * depth), ' ');
}

}  // namespace detail

/// Non-finite doubles have no JSON literal; they are written as the tagged
/// object {"$num":"nan"|"inf"|"-inf"} and decoded by decode_double().
inline void write_json(std::string& out, const Json& j, int indent = -1, int depth = 0) {
    using T = Json::value_t;
    switch (j.type()) {
    case T::null:
        out += "null";
        break;
    case T::boolean:
        out += j.get<bool>() ? "true" : "false";
        break;
    case T::number_integer:
        out += std::to_string(j.get<std::int64_t>());
        break;
    case T::number_unsigned:
        out += std::to_string(j.get<std::uint64_t>());
        break;
    case T::number_float: {
        const double v = j.get<double>();
        if (std::isfinite(v)) {
            out += format_double(v);
        } else {
            out += R"({"$num":")";
            out += std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
            out += "\"}";
        }
        break;
    }
    case T::string:
        out += json_quote(j.get_ref<const std::string&>());
        break;
    case T::array: {
        if (j.empty()) {
            out += "[]";
            break;
        }
        out += '[';
        bool first = true;
        for (const auto& item : j) {
            if (!first) out += ',';
            first = false;
            detail::newline(out, indent, depth + 1);
            write_json(out, item, indent, depth + 1);
        }
        detail::newline(out, indent, depth);
        out += ']';
        break;
    }
    case T::object: {
        if (j.empty()) {
            out += "{}";
            break;
        }
        out += '{';
        bool first = true;
        for (const auto& [key, item] : j.items()) {
            if (!first) out += ',';
            first = false;
            detail::newline(out, indent, depth + 1);
            out += json_quote(key);
            out += indent < 0 ? ":" : ": ";
            write_json(out, item, indent, depth + 1);
        }
        detail::newline(out, indent, depth);
        out += '}';
        break;
    }
    case T::binary:
    case T::discarded:
        throw ArchiveError("cannot write binary or discarded JSON values as text");
    }
}

inline std::string to_canonical_json(const Json& j, int indent = -1) {
    std::string out;
    write_json(out, j, indent);
    return out;
}

inline bool is_nonfinite_tag(const Json& j) {
    return j.is_object() && j.size() == 1 && j.contains("$num") && j["$num"].is_string();
}

/// Reads a number written by write_json, including the non-finite tag.
inline double decode_double(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (is_nonfinite_tag(j)) {
        const auto& tag = j["$num"].get_ref<const std::string&>();
        if (tag == "nan") return std::nan("");
        if (tag == "inf") return HUGE_VAL;
        if (tag == "-inf") return -HUGE_VAL;
    }
    throw ArchiveError("expected a number, found " + j.dump());
}

}  // namespace simengine
