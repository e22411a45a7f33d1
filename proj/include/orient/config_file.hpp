#pragma once

// Reads experiment config files. JSON is parsed directly; anything else
// goes through CLI11's TOML reader and is converted to the same JSON shape,
// so both formats feed the same apply_json functions.

#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "orient/error.hpp"

namespace orient {

namespace detail {

inline nlohmann::json toml_scalar(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  if (!s.empty()) {
    const char* begin = s.c_str();
    char* end = nullptr;
    errno = 0;
    const long long i = std::strtoll(begin, &end, 10);
    if (errno == 0 && end == begin + s.size()) return i;
    errno = 0;
    const double d = std::strtod(begin, &end);
    if (errno == 0 && end == begin + s.size()) return d;
  }
  return s;
}

}  // namespace detail

inline nlohmann::json parse_toml(std::istream& in) {
  nlohmann::json root = nlohmann::json::object();
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw InputError(std::string("invalid TOML: ") + e.what());
  }
  for (const auto& item : items) {
    nlohmann::json* node = &root;
    for (const auto& p : item.parents) {
      if (!node->contains(p)) (*node)[p] = nlohmann::json::object();
      node = &(*node)[p];
      if (!node->is_object()) throw InputError("TOML key " + p + " is both a value and a table");
    }
    if (item.name == "++" || item.name == "--") continue;  // table open/close markers
    if (item.inputs.size() == 1) {
      (*node)[item.name] = detail::toml_scalar(item.inputs[0]);
    } else {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& v : item.inputs) arr.push_back(detail::toml_scalar(v));
      (*node)[item.name] = std::move(arr);
    }
  }
  return root;
}

inline nlohmann::json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read config file " + path.string());
  if (path.extension() == ".json") {
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("invalid JSON in " + path.string() + ": " + e.what());
    }
  }
  return parse_toml(in);
}

}  // namespace orient
