#include "fairlat/config.hpp"

#include <charconv>
#include <sstream>

#include "fairlat/errors.hpp"
#include "fairlat/textio.hpp"

namespace fairlat {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

Config Config::parse_file(const std::string& path) {
  return parse_string(read_text_file(path), path);
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
  Config config;
  config.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (section.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": key '" + key + "' outside any section");
    auto [it, inserted] = config.sections_[section].emplace(key, Entry{value});
    if (!inserted)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                        section + "." + key + "'");
  }
  return config;
}

const Config::Entry* Config::find(const std::string& section,
                                  const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  auto k = s->second.find(key);
  if (k == s->second.end()) return nullptr;
  k->second.consumed = true;
  return &k->second;
}

const Config::Entry& Config::require(const std::string& section,
                                     const std::string& key) const {
  const Entry* e = find(section, key);
  if (!e)
    throw ConfigError(origin_ + ": missing required key '" + section + "." + key + "'");
  return *e;
}

bool Config::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

bool Config::has_section(const std::string& section) const {
  return sections_.count(section) > 0;
}

std::string Config::get_string(const std::string& section,
                               const std::string& key) const {
  return require(section, key).value;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
  const Entry* e = find(section, key);
  return e ? e->value : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
  const std::string& v = require(section, key).value;
  const auto parsed = parse_double(v);
  if (!parsed)
    throw ConfigError(origin_ + ": '" + section + "." + key + "' is not a number: " + v);
  return *parsed;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  return find(section, key) == nullptr ? fallback : get_double(section, key);
}

long Config::get_int(const std::string& section, const std::string& key) const {
  const std::string v = require(section, key).value;
  long out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(origin_ + ": '" + section + "." + key +
                      "' is not an integer: " + v);
  return out;
}

long Config::get_int(const std::string& section, const std::string& key,
                     long fallback) const {
  return find(section, key) == nullptr ? fallback : get_int(section, key);
}

std::uint64_t Config::get_seed(const std::string& section, const std::string& key,
                               std::uint64_t fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::uint64_t out = 0;
  auto res = std::from_chars(e->value.data(), e->value.data() + e->value.size(), out);
  if (res.ec != std::errc() || res.ptr != e->value.data() + e->value.size())
    throw ConfigError(origin_ + ": '" + section + "." + key +
                      "' is not an unsigned integer: " + e->value);
  return out;
}

std::vector<std::string> Config::get_list(const std::string& section,
                                          const std::string& key) const {
  return split_list(require(section, key).value);
}

std::vector<std::string> Config::get_list(
    const std::string& section, const std::string& key,
    const std::vector<std::string>& fallback) const {
  const Entry* e = find(section, key);
  return e ? split_list(e->value) : fallback;
}

void Config::check_all_consumed() const {
  std::vector<std::string> unknown;
  for (const auto& [section, keys] : sections_)
    for (const auto& [key, entry] : keys)
      if (!entry.consumed) unknown.push_back(section + "." + key);
  if (!unknown.empty()) {
    std::string msg = origin_ + ": unknown key(s):";
    for (const std::string& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
}

void Config::check_consumed(const std::vector<std::string>& sections) const {
  std::vector<std::string> unknown;
  for (const std::string& section : sections) {
    auto s = sections_.find(section);
    if (s == sections_.end()) continue;
    for (const auto& [key, entry] : s->second)
      if (!entry.consumed) unknown.push_back(section + "." + key);
  }
  if (!unknown.empty()) {
    std::string msg = origin_ + ": unknown key(s):";
    for (const std::string& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
}

void Config::check_sections(const std::vector<std::string>& known) const {
  for (const auto& [section, keys] : sections_) {
    bool ok = false;
    for (const std::string& k : known) ok = ok || k == section;
    if (!ok)
      throw ConfigError(origin_ + ": unknown section [" + section + "]");
  }
}

void Manifest::set(const std::string& section, const std::string& key,
                   std::string value) {
  sections_[section][key] = std::move(value);
}

void Manifest::set(const std::string& section, const std::string& key, double value) {
  sections_[section][key] = format_double(value);
}

void Manifest::set(const std::string& section, const std::string& key,
                   std::uint64_t value) {
  sections_[section][key] = std::to_string(value);
}

void Manifest::set(const std::string& section, const std::string& key, long value) {
  sections_[section][key] = std::to_string(value);
}

std::string Manifest::to_string() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, keys] : sections_) {
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    for (const auto& [key, value] : keys) out << key << " = " << value << '\n';
  }
  return out.str();
}

void Manifest::write(const std::string& path) const {
  write_text_file(path, to_string());
}

}  // namespace fairlat
