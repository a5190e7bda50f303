#pragma once

#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "simengine/errors.hpp"
#include "simengine/json_io.hpp"

namespace simengine {

/// A table cell or a scalar script output. The default-constructed value is
/// "missing" (rendered NA).
class Scalar {
public:
    using Storage = std::variant<std::monostate, double, std::int64_t, std::string, bool>;

    Scalar() = default;
    Scalar(double v) : v_(v) {}
    Scalar(float v) : v_(static_cast<double>(v)) {}
    template <std::integral T>
        requires(!std::same_as<T, bool>)
    Scalar(T v) : v_(static_cast<std::int64_t>(v)) {}
    Scalar(bool v) : v_(v) {}
    Scalar(std::string v) : v_(std::move(v)) {}
    Scalar(std::string_view v) : v_(std::string(v)) {}
    Scalar(const char* v) : v_(std::string(v)) {}

    const Storage& storage() const noexcept { return v_; }
    bool is_missing() const noexcept { return std::holds_alternative<std::monostate>(v_); }
    bool is_text() const noexcept { return std::holds_alternative<std::string>(v_); }

    /// Numeric view: doubles, integers and booleans (as 0/1). Text and
    /// missing values yield nullopt.
    std::optional<double> to_number() const {
        if (auto d = std::get_if<double>(&v_)) return *d;
        if (auto i = std::get_if<std::int64_t>(&v_)) return static_cast<double>(*i);
        if (auto b = std::get_if<bool>(&v_)) return *b ? 1.0 : 0.0;
        return std::nullopt;
    }

    std::string display() const {
        struct Visitor {
            std::string operator()(std::monostate) const { return "NA"; }
            std::string operator()(double d) const { return display_double(d); }
            std::string operator()(std::int64_t i) const { return std::to_string(i); }
            std::string operator()(const std::string& s) const { return s; }
            std::string operator()(bool b) const { return b ? "TRUE" : "FALSE"; }
        };
        return std::visit(Visitor{}, v_);
    }

    Json to_json() const {
        struct Visitor {
            Json operator()(std::monostate) const { return nullptr; }
            Json operator()(double d) const { return d; }
            Json operator()(std::int64_t i) const { return i; }
            Json operator()(const std::string& s) const { return s; }
            Json operator()(bool b) const { return b; }
        };
        return std::visit(Visitor{}, v_);
    }

    static Scalar from_json(const Json& j) {
        switch (j.type()) {
        case Json::value_t::null:
            return {};
        case Json::value_t::boolean:
            return j.get<bool>();
        case Json::value_t::number_integer:
            return j.get<std::int64_t>();
        case Json::value_t::number_unsigned:
            return static_cast<std::int64_t>(j.get<std::uint64_t>());
        case Json::value_t::number_float:
            return j.get<double>();
        case Json::value_t::string:
            return j.get<std::string>();
        default:
            if (is_nonfinite_tag(j)) return decode_double(j);
            throw ArchiveError("not a scalar value: " + j.dump());
        }
    }

    bool operator==(const Scalar&) const = default;

private:
    Storage v_;
};

/// A labelled level value carrying an arbitrary payload tree (numbers,
/// strings, flags, arrays, objects). Only the label shows up in tables.
struct Structured {
    std::string label;
    Json payload;

    bool operator==(const Structured&) const = default;
};

enum class LevelKind { number, integer, text, flag, structured };

class LevelValue {
public:
    using Storage = std::variant<double, std::int64_t, std::string, bool, Structured>;

    LevelValue(double v) : v_(v) {}
    template <std::integral T>
        requires(!std::same_as<T, bool>)
    LevelValue(T v) : v_(static_cast<std::int64_t>(v)) {}
    LevelValue(bool v) : v_(v) {}
    LevelValue(std::string v) : v_(std::move(v)) {}
    LevelValue(const char* v) : v_(std::string(v)) {}
    LevelValue(Structured v) : v_(std::move(v)) {}

    static LevelValue structured(std::string label, Json payload) {
        return LevelValue(Structured{std::move(label), std::move(payload)});
    }

    LevelKind kind() const noexcept { return static_cast<LevelKind>(v_.index()); }
    const Storage& storage() const noexcept { return v_; }

    double as_number() const {
        if (auto d = std::get_if<double>(&v_)) return *d;
        if (auto i = std::get_if<std::int64_t>(&v_)) return static_cast<double>(*i);
        throw UsageError("level value '" + label() + "' is not numeric");
    }
    std::int64_t as_integer() const {
        if (auto i = std::get_if<std::int64_t>(&v_)) return *i;
        if (auto d = std::get_if<double>(&v_); d && *d == static_cast<double>(static_cast<std::int64_t>(*d)))
            return static_cast<std::int64_t>(*d);
        throw UsageError("level value '" + label() + "' is not an integer");
    }
    const std::string& as_text() const {
        if (auto s = std::get_if<std::string>(&v_)) return *s;
        throw UsageError("level value '" + label() + "' is not text");
    }
    bool as_flag() const {
        if (auto b = std::get_if<bool>(&v_)) return *b;
        throw UsageError("level value '" + label() + "' is not a flag");
    }
    const Structured& as_structured() const {
        if (auto s = std::get_if<Structured>(&v_)) return *s;
        throw UsageError("level value '" + label() + "' is not structured");
    }

    /// What appears in result and summary tables.
    std::string label() const {
        if (auto s = std::get_if<Structured>(&v_)) return s->label;
        return column_value().display();
    }

    Scalar column_value() const {
        struct Visitor {
            Scalar operator()(double d) const { return d; }
            Scalar operator()(std::int64_t i) const { return i; }
            Scalar operator()(const std::string& s) const { return s; }
            Scalar operator()(bool b) const { return b; }
            Scalar operator()(const Structured& s) const { return s.label; }
        };
        return std::visit(Visitor{}, v_);
    }

    /// Typed encoding used in archive manifests.
    Json to_json() const {
        struct Visitor {
            Json operator()(double d) const { return d; }
            Json operator()(std::int64_t i) const { return i; }
            Json operator()(const std::string& s) const { return s; }
            Json operator()(bool b) const { return b; }
            Json operator()(const Structured& s) const {
                Json j = Json::object();
                j["label"] = s.label;
                j["payload"] = s.payload;
                return j;
            }
        };
        return std::visit(Visitor{}, v_);
    }

    static LevelValue from_json(const Json& j) {
        switch (j.type()) {
        case Json::value_t::boolean:
            return j.get<bool>();
        case Json::value_t::number_integer:
            return j.get<std::int64_t>();
        case Json::value_t::number_unsigned:
            return static_cast<std::int64_t>(j.get<std::uint64_t>());
        case Json::value_t::number_float:
            return j.get<double>();
        case Json::value_t::string:
            return j.get<std::string>();
        case Json::value_t::object:
            if (is_nonfinite_tag(j)) return decode_double(j);
            if (j.contains("label") && j["label"].is_string())
                return structured(j["label"].get<std::string>(), j.value("payload", Json()));
            [[fallthrough]];
        default:
            throw ArchiveError("not a level value: " + j.dump());
        }
    }

    /// Kind-tagged text used to build RNG stream keys and batch keys.
    std::string canonical() const {
        struct Visitor {
            std::string operator()(double d) const {
                return "d:" + to_canonical_json(Json(d));
            }
            std::string operator()(std::int64_t i) const { return "i:" + std::to_string(i); }
            std::string operator()(const std::string& s) const { return json_quote(s); }
            std::string operator()(bool b) const { return b ? "b:true" : "b:false"; }
            std::string operator()(const Structured& s) const {
                return "s:" + json_quote(s.label) + ":" + to_canonical_json(s.payload);
            }
        };
        return std::visit(Visitor{}, v_);
    }

    bool operator==(const LevelValue&) const = default;

private:
    Storage v_;
};

}  // namespace simengine
