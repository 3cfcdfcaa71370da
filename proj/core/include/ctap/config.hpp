#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ctap {

/// Flat `key = value` file. `#` starts a comment; blank lines are ignored; keys are unique.
/// Every accessor records the key as consumed so that leftovers can be reported as typos.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in);
  static KeyValueFile load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<int>> get_int_list(const std::string& key) const;

  /// Throws ConfigError naming the first key no accessor asked for.
  void reject_unknown_keys() const;

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  const Entry* find(const std::string& key) const;

  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> consumed_;
};

}  // namespace ctap
