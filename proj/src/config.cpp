// SPDX-License-Identifier: Apache-2.0
#include "mssf/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mssf/error.hpp"

namespace mssf {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, const std::string& origin) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const auto line = trim(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    ++line_no;
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value, got '" + line + "'");
    auto key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    kv.values_[key] = trim(std::string_view(line).substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const std::string& KeyValues::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key " + key);
  return it->second;
}

long long KeyValues::get_int(const std::string& key) const {
  const auto& s = get(key);
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("config key " + key + ": expected an integer, got '" + s + "'");
  return v;
}

std::size_t KeyValues::get_size(const std::string& key) const {
  const auto v = get_int(key);
  if (v < 0) throw ConfigError("config key " + key + ": expected a non-negative integer, got " + get(key));
  return static_cast<std::size_t>(v);
}

double KeyValues::get_real(const std::string& key) const {
  const auto& s = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected a number, got '" + s + "'");
  }
}

bool KeyValues::get_bool(const std::string& key) const {
  const auto& s = get(key);
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError("config key " + key + ": expected true or false, got '" + s + "'");
}

std::vector<std::size_t> KeyValues::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    KeyValues tmp;
    tmp.set(key, trim(item));
    out.push_back(tmp.get_size(key));
  }
  return out;
}

void KeyValues::merge(const KeyValues& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string KeyValues::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string resolve_key(const std::string& key, const std::vector<std::string>& known) {
  for (const auto& k : known)
    if (k == key) return k;
  std::vector<std::string> hits;
  for (const auto& k : known)
    if (k.size() > key.size() && k.ends_with(key) && k[k.size() - key.size() - 1] == '.') hits.push_back(k);
  if (hits.size() == 1) return hits[0];
  if (hits.empty()) throw ConfigError("unknown config key " + key);
  std::string list;
  for (const auto& h : hits) list += (list.empty() ? "" : ", ") + h;
  throw ConfigError("ambiguous config key " + key + " (matches " + list + ")");
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char tmp[64];
    std::snprintf(tmp, sizeof tmp, "%.*g", prec, v);
    if (std::stod(tmp) == v) return tmp;
  }
  return buf;
}

}  // namespace mssf
