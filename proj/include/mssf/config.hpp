// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mssf {

/// Flat `key = value` configuration. Lines starting with '#' are comments;
/// keys are dotted paths such as `model.channels`.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, const std::string& origin = "<text>");
  static KeyValues load(const std::string& path);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string get_string(const std::string& key) const { return get(key); }
  long long get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;

  /// Copies every entry of `other` over this one.
  void merge(const KeyValues& other);

  /// Canonical text: one `key = value` line per entry, sorted by key.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Resolves a possibly shortened key against `known`: exact match first,
/// then a unique dotted-suffix match (`total_iters` -> `train.total_iters`).
/// Unknown or ambiguous keys are a ConfigError.
std::string resolve_key(const std::string& key, const std::vector<std::string>& known);

std::string format_real(double v);

}  // namespace mssf
