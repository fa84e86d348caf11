#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace voxport {

/// Flat `key = value` text. Blank lines and lines starting with '#' are
/// skipped; keys are unique. Order of keys is preserved on write.
struct KeyValueFile {
  std::vector<std::pair<std::string, std::string>> entries;

  void set(const std::string& key, const std::string& value);
  const std::string* find(const std::string& key) const;
  const std::string& at(const std::string& key) const;  // ParseError when missing

  static KeyValueFile parse(const std::string& text, const std::string& origin = "<text>");
  static KeyValueFile read(const std::filesystem::path& path);
  std::string dump() const;
  void write(const std::filesystem::path& path) const;
};

std::vector<double> parse_doubles(const std::string& value, const std::string& key);
std::vector<long> parse_longs(const std::string& value, const std::string& key);

}  // namespace voxport
