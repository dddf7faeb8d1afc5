#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fairlat {

/// Flat-sectioned key-value config file:
///   [section]
///   key = value        # full-line comments start with '#'
/// Lists are comma-separated. Keys left unread by a command are rejected, so
/// typos surface with their section.key path.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text, const std::string& origin);

  bool has(const std::string& section, const std::string& key) const;
  bool has_section(const std::string& section) const;

  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  long get_int(const std::string& section, const std::string& key) const;
  long get_int(const std::string& section, const std::string& key,
               long fallback) const;
  std::uint64_t get_seed(const std::string& section, const std::string& key,
                         std::uint64_t fallback) const;
  std::vector<std::string> get_list(const std::string& section,
                                    const std::string& key) const;
  std::vector<std::string> get_list(const std::string& section,
                                    const std::string& key,
                                    const std::vector<std::string>& fallback) const;

  /// Throws ConfigError naming every key that no command consumed.
  void check_all_consumed() const;

  /// Rejects unconsumed keys inside the listed sections; other sections may
  /// belong to other commands sharing the file.
  void check_consumed(const std::vector<std::string>& sections) const;

  /// Rejects section names outside the known set, catching header typos.
  void check_sections(const std::vector<std::string>& known) const;

 private:
  struct Entry {
    std::string value;
    mutable bool consumed = false;
  };
  const Entry* find(const std::string& section, const std::string& key) const;
  const Entry& require(const std::string& section, const std::string& key) const;

  std::string origin_;
  // section -> key -> entry; std::map keeps manifest echoes sorted and stable.
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

/// Deterministic key-value manifest, written as the same config syntax so a
/// manifest can be re-parsed for byte-level reproduction.
class Manifest {
 public:
  void set(const std::string& section, const std::string& key, std::string value);
  void set(const std::string& section, const std::string& key, double value);
  void set(const std::string& section, const std::string& key, std::uint64_t value);
  void set(const std::string& section, const std::string& key, long value);
  std::string to_string() const;
  void write(const std::string& path) const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

std::vector<std::string> split_list(const std::string& value);

}  // namespace fairlat
