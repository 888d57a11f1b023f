#pragma once

// Path-tracking accessors so configuration errors name the offending field.

#include <string>
#include <string_view>

#include "json.hpp"

#include "guttation/color.hpp"
#include "guttation/errors.hpp"
#include "guttation/geometry.hpp"

namespace guttation::detail {

using Json = nlohmann::json;

[[noreturn]] inline void field_error(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::ParseError, path + ": " + what);
}

inline Json parse_document(std::string_view text, std::string_view what) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        std::size_t line = 1, column = 1;
        const std::size_t end = std::min<std::size_t>(e.byte, text.size());
        for (std::size_t i = 0; i + 1 < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw Error(ErrorCode::ParseError, std::string(what) + " line " + std::to_string(line) +
                                               ", column " + std::to_string(column) + ": " +
                                               e.what());
    }
}

inline const Json& member(const Json& obj, const std::string& path, const char* key) {
    if (!obj.is_object()) field_error(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) field_error(path + "." + key, "missing field");
    return *it;
}

inline double number(const Json& v, const std::string& path) {
    if (!v.is_number()) field_error(path, "expected a number");
    return v.get<double>();
}

inline double number_at(const Json& obj, const std::string& path, const char* key) {
    return number(member(obj, path, key), path + "." + key);
}

inline std::string text_at(const Json& obj, const std::string& path, const char* key) {
    const Json& v = member(obj, path, key);
    if (!v.is_string()) field_error(path + "." + key, "expected a string");
    return v.get<std::string>();
}

inline Point2 point(const Json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2) field_error(path, "expected [x, y]");
    return {number(v[0], path + "[0]"), number(v[1], path + "[1]")};
}

inline Color color(const Json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 3) field_error(path, "expected [r, g, b]");
    Color c{number(v[0], path + "[0]"), number(v[1], path + "[1]"), number(v[2], path + "[2]")};
    if (!c.in_unit_cube()) field_error(path, "colour channels must lie in [0, 1]");
    return c;
}

inline Json to_json(const Color& c) { return Json::array({c.r, c.g, c.b}); }
inline Json to_json(Point2 p) { return Json::array({p.x, p.y}); }

}  // namespace guttation::detail
