#pragma once

#include "warpu/errors.hpp"

#include <json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace warpu {

// Reads fields off a JSON object while remembering which keys were used, so
// leftovers can be reported as unknown. Problems are collected, not thrown.
class JsonFields {
 public:
  JsonFields(const nlohmann::json& obj, std::string path, std::vector<std::string>& problems)
      : obj_(obj), path_(std::move(path)), problems_(problems) {
    if (!obj_.is_object()) problems_.push_back(path_ + ": expected an object");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return obj_.is_object() && obj_.contains(key);
  }

  template <typename T>
  std::optional<T> opt(const std::string& key) {
    if (!has(key)) return std::nullopt;
    try {
      return obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      problems_.push_back(path_ + "." + key + ": wrong type");
      return std::nullopt;
    }
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    auto v = opt<T>(key);
    return v ? *v : fallback;
  }

  template <typename T>
  T req(const std::string& key) {
    if (!has(key)) {
      problems_.push_back(path_ + "." + key + ": required");
      return T{};
    }
    auto v = opt<T>(key);
    return v ? *v : T{};
  }

  const nlohmann::json* child(const std::string& key) {
    if (!has(key)) return nullptr;
    return &obj_.at(key);
  }

  void check(bool ok, const std::string& key, const std::string& msg) {
    if (!ok) problems_.push_back(path_ + "." + key + ": " + msg);
  }

  // Flag every key that was never asked for.
  void finish() {
    if (!obj_.is_object()) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!used_.count(it.key())) problems_.push_back(path_ + "." + it.key() + ": unknown key");
  }

  const std::string& path() const { return path_; }

 private:
  const nlohmann::json& obj_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> used_;
};

inline void throw_if_problems(const std::vector<std::string>& problems) {
  if (!problems.empty()) throw ConfigError(problems);
}

}  // namespace warpu
