// Copyright 2026 The iclb Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "iclb/error.hpp"
#include "json.hpp"

namespace iclb::detail {

// Reads a JSON object where every key is required (nullable keys hold an
// explicit null) and unknown keys are rejected by finish().
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  const nlohmann::json& at(std::string_view key) {
    auto it = j_.find(key);
    if (it == j_.end()) throw ConfigError(where_ + ": missing field '" + std::string(key) + "'");
    used_.emplace(key);
    return *it;
  }

  template <typename T>
  T get(std::string_view key) {
    const auto& v = at(key);
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where_ + ": field '" + std::string(key) + "' has the wrong type");
    }
  }

  template <typename T>
  std::optional<T> get_nullable(std::string_view key) {
    if (at(key).is_null()) return std::nullopt;
    return get<T>(key);
  }

  std::string path(std::string_view key) const { return where_ + "." + std::string(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.contains(it.key())) {
        throw ConfigError(where_ + ": unknown field '" + it.key() + "'");
      }
    }
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string, std::less<>> used_;
};

}  // namespace iclb::detail
