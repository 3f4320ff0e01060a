#pragma once

// Internal helpers shared by io.cpp and harness.cpp; not installed.

#include <string>
#include <string_view>

#include <json.hpp>

#include "multidag/errors.hpp"
#include "multidag/joint_solver.hpp"

namespace multidag::io::detail {

using json = nlohmann::json;

// Parses JSON, mapping syntax errors to ParseError with a line number.
json parse_json(std::string_view text, std::string_view origin);

// ParseError naming the line where `key` appears in `text`.
[[noreturn]] void config_error(std::string_view text, std::string_view key, const std::string& message);

// Reads `key` as T, with a line-precise error on type mismatch.
template <typename T>
T get_as(const json& obj, std::string_view key, std::string_view text) {
  try {
    return obj.at(std::string(key)).get<T>();
  } catch (const json::exception& e) {
    config_error(text, key, std::string("invalid value for '") + std::string(key) + "': " + e.what());
  }
}

// Applies the keys of `obj` onto `base`. `text` is the whole document, used
// only for error line numbers.
Hyperparams apply_hyperparams(const json& obj, std::string_view text, Hyperparams base);
json hyperparams_json(const Hyperparams& h);

}  // namespace multidag::io::detail
