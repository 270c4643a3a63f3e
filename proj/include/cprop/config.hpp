#pragma once

// Flat `key = value` configuration text, '#' starts a comment. Later
// assignments override earlier ones, which is how command-line flags are
// layered over a file.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "cprop/error.hpp"
#include "cprop/graph_io.hpp"

namespace cprop {

class KeyValues {
public:
  static KeyValues parse(std::istream& in, const std::string& source = "<config>") {
    KeyValues kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto text = trim(line);
      if (text.empty()) continue;
      const auto eq = text.find('=');
      if (eq == std::string_view::npos) throw FormatError(source, line_no, "expected 'key = value'");
      const auto key = trim(text.substr(0, eq));
      const auto value = trim(text.substr(eq + 1));
      if (key.empty()) throw FormatError(source, line_no, "empty key");
      kv.set(std::string(key), std::string(value));
    }
    return kv;
  }

  static KeyValues load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse(in, path);
  }

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

  /// Entries of `other` override ours.
  void merge(const KeyValues& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  void write(std::ostream& out) const {
    for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
  }

  friend bool operator==(const KeyValues&, const KeyValues&) = default;

private:
  static std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

/// Typed reads from a KeyValues, recording every resolved value (defaults
/// included) so the run can echo its full parameter set.
class ConfigReader {
public:
  explicit ConfigReader(const KeyValues& kv, std::string context) : kv_(&kv), context_(std::move(context)) {}

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!kv_->has(key)) {
      record(key, fallback);
      return fallback;
    }
    return require<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    const auto it = kv_->entries().find(key);
    if (it == kv_->entries().end()) throw ConfigError(context_ + ": missing required key '" + key + "'");
    used_.insert(key);
    T value = convert<T>(key, it->second);
    record(key, value);
    return value;
  }

  /// seed_<name>, falling back to the shared `seed` key.
  std::uint64_t seed(const std::string& name) {
    const std::string key = "seed_" + name;
    if (kv_->has(key)) return require<std::uint64_t>(key);
    if (kv_->has("seed")) {
      used_.insert("seed");
      const auto s = convert<std::uint64_t>("seed", kv_->entries().at("seed"));
      record(key, s);
      return s;
    }
    throw ConfigError(context_ + ": missing required key '" + key + "' (or a shared 'seed')");
  }

  template <class T>
  std::vector<T> list(const std::string& key, std::vector<T> fallback) {
    if (!kv_->has(key)) {
      resolved_.set(key, join(fallback));
      return fallback;
    }
    used_.insert(key);
    std::vector<T> out;
    std::string_view text = kv_->entries().at(key);
    while (!text.empty()) {
      const auto comma = text.find(',');
      auto item = text.substr(0, comma);
      while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
      while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
      if (!item.empty()) out.push_back(convert<T>(key, std::string(item)));
      if (comma == std::string_view::npos) break;
      text.remove_prefix(comma + 1);
    }
    if (out.empty()) throw ConfigError(context_ + ": key '" + key + "' needs at least one value");
    resolved_.set(key, join(out));
    return out;
  }

  /// Rejects keys nobody asked for (typos). The shared `seed` is always allowed.
  void finish() const {
    for (const auto& [k, v] : kv_->entries())
      if (!used_.count(k) && k != "seed") throw ConfigError(context_ + ": unknown key '" + k + "'");
  }

  bool has(const std::string& key) const { return kv_->has(key); }

  const KeyValues& resolved() const noexcept { return resolved_; }
  const std::string& context() const noexcept { return context_; }

private:
  template <class T>
  T convert(const std::string& key, const std::string& text) const {
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "1" || text == "true" || text == "yes") return true;
      if (text == "0" || text == "false" || text == "no") return false;
      throw ConfigError(context_ + ": key '" + key + "' expects a boolean, got '" + text + "'");
    } else {
      T value{};
      auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc{} || end != text.data() + text.size())
        throw ConfigError(context_ + ": key '" + key + "' cannot parse '" + text + "'");
      return value;
    }
  }

  template <class T>
  static std::string to_text(const T& v) {
    if constexpr (std::is_same_v<T, std::string>) return v;
    else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
    else if constexpr (std::is_floating_point_v<T>) return format_real(v);
    else return std::to_string(v);
  }

  template <class T>
  void record(const std::string& key, const T& v) { resolved_.set(key, to_text(v)); }

  template <class T>
  static std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + to_text(v[i]);
    return s;
  }

  const KeyValues* kv_;
  std::string context_;
  std::set<std::string> used_;
  KeyValues resolved_;
};

}  // namespace cprop
