#include "ctap/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ctap/errors.hpp"

namespace ctap {

namespace {

std::string trim(const std::string& s) {
  const auto first = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  const auto last = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
  return first < last ? std::string(first, last) : std::string();
}

}  // namespace

KeyValueFile KeyValueFile::parse(std::istream& in) {
  KeyValueFile out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line_no);
    if (value.empty()) throw ConfigError("empty value", line_no, key);
    if (!out.entries_.emplace(key, Entry{value, line_no}).second) throw ConfigError("duplicate key", line_no, key);
  }
  return out;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse(in);
}

const KeyValueFile::Entry* KeyValueFile::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  consumed_.insert(key);
  return &it->second;
}

std::optional<std::string> KeyValueFile::get_string(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  return e->value;
}

std::optional<double> KeyValueFile::get_double(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(e->value, &used);
    if (used != e->value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + e->value + "'", e->line, key);
  }
}

std::optional<std::int64_t> KeyValueFile::get_int(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  std::int64_t v = 0;
  const char* end = e->value.data() + e->value.size();
  const auto [ptr, ec] = std::from_chars(e->value.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("expected an integer, got '" + e->value + "'", e->line, key);
  return v;
}

std::optional<bool> KeyValueFile::get_bool(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  throw ConfigError("expected true/false, got '" + e->value + "'", e->line, key);
}

std::optional<std::vector<int>> KeyValueFile::get_int_list(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  std::vector<int> out;
  std::stringstream ss(e->value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
      throw ConfigError("expected a comma-separated integer list, got '" + e->value + "'", e->line, key);
    out.push_back(v);
  }
  return out;
}

void KeyValueFile::reject_unknown_keys() const {
  for (const auto& [key, entry] : entries_)
    if (!consumed_.count(key)) throw ConfigError("unknown key", entry.line, key);
}

}  // namespace ctap
