#include "voxport/kvfile.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "voxport/errors.hpp"

namespace voxport {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void KeyValueFile::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

const std::string* KeyValueFile::find(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return &v;
  }
  return nullptr;
}

const std::string& KeyValueFile::at(const std::string& key) const {
  if (const auto* v = find(key)) return *v;
  throw ParseError("missing key '" + key + "'");
}

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError(origin + ":" + std::to_string(line_no) + ": expected 'key = value', got \"" + t + "\"");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ParseError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (kv.find(key)) throw ParseError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    kv.entries.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return kv;
}

KeyValueFile KeyValueFile::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::string KeyValueFile::dump() const {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

void KeyValueFile::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << dump();
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<double> parse_doubles(const std::string& value, const std::string& key) {
  std::vector<double> out;
  std::string norm = value;
  for (auto& c : norm) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(norm);
  for (std::string w; in >> w;) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) {
      throw ParseError("key '" + key + "': '" + w + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<long> parse_longs(const std::string& value, const std::string& key) {
  std::vector<long> out;
  std::string norm = value;
  for (auto& c : norm) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(norm);
  for (std::string w; in >> w;) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) {
      throw ParseError("key '" + key + "': '" + w + "' is not an integer");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace voxport
