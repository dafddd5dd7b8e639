#pragma once

// Strict reader for JSON config objects: every key must be consumed and
// every value must have the type of the field it lands in.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "histocell/errors.hpp"

namespace histocell::detail {

class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(label() + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    read(*it, out, qualified(key));
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::string qualified(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw ConfigError("unknown config key '" + qualified(key.c_str()) + "'");
  }

 private:
  std::string label() const { return where_.empty() ? "config" : "config key '" + where_ + "'"; }

  static void read(const nlohmann::json& v, double& out, const std::string& key) {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    out = v.get<double>();
  }
  static void read(const nlohmann::json& v, bool& out, const std::string& key) {
    if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
    out = v.get<bool>();
  }
  template <typename U>
    requires(std::is_unsigned_v<U> && !std::is_same_v<U, bool>)
  static void read(const nlohmann::json& v, U& out, const std::string& key) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ConfigError("config key '" + key + "' must be a non-negative integer");
    out = static_cast<U>(v.get<std::uint64_t>());
  }
  static void read(const nlohmann::json& v, std::string& out, const std::string& key) {
    if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
    out = v.get<std::string>();
  }
  static void read(const nlohmann::json& v, std::filesystem::path& out, const std::string& key) {
    std::string s;
    read(v, s, key);
    out = s;
  }
  template <typename E>
  static void read(const nlohmann::json& v, std::vector<E>& out, const std::string& key) {
    if (!v.is_array()) throw ConfigError("config key '" + key + "' must be an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      E e{};
      read(v[i], e, key + "[" + std::to_string(i) + "]");
      out.push_back(std::move(e));
    }
  }

  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace histocell::detail
