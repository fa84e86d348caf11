#include "voxport/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <stdexcept>

#include "voxport/csv.hpp"
#include "voxport/errors.hpp"

namespace voxport {
namespace {

std::size_t as_size(const std::string& v, const std::string& key) {
  const auto x = parse_longs(v, key);
  if (x.size() != 1 || x[0] < 0) throw ParseError("'" + key + "' must be one non-negative integer");
  return static_cast<std::size_t>(x[0]);
}

double as_double(const std::string& v, const std::string& key) {
  const auto x = parse_doubles(v, key);
  if (x.size() != 1) throw ParseError("'" + key + "' must be one number");
  return x[0];
}

std::uint64_t as_u64(const std::string& v, const std::string& key) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ParseError("'" + key + "' must be an unsigned integer");
  return out;
}

std::string join(const std::vector<std::size_t>& xs) {
  std::string s;
  for (const auto x : xs) s += (s.empty() ? "" : " ") + std::to_string(x);
  return s;
}

}  // namespace

void PipelineConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (static_cast<std::size_t>(grid.cell_count()) != tiles || grid.gx < 1 || grid.gy < 1 || grid.gz < 1) {
    fail("grid product must equal tiles");
  }
  if (cubes == 0 || points == 0 || points % cubes != 0) fail("points must be a positive multiple of cubes");
  if (batch == 0) fail("batch must be positive");
  if (k == 0) fail("k must be positive");
  if (widths.size() < 2) fail("widths needs at least two entries");
  for (const auto w : widths) {
    if (w < 2 || w % 2 != 0) fail("widths must be even and >= 2");
  }
  fov.validate();
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must be in (0, 1]");
  if (freq_threshold < 1) fail("freq_threshold must be >= 1");
  if (!(lr > 0.0) || !(traj_lr > 0.0)) fail("learning rates must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (traj_hidden == 0 || traj_window == 0) fail("trajectory sizes must be positive");
}

KeyValueFile PipelineConfig::to_kv() const {
  KeyValueFile kv;
  kv.set("tiles", std::to_string(tiles));
  kv.set("grid", std::to_string(grid.gx) + " " + std::to_string(grid.gy) + " " + std::to_string(grid.gz));
  kv.set("points", std::to_string(points));
  kv.set("cubes", std::to_string(cubes));
  kv.set("batch", std::to_string(batch));
  kv.set("k", std::to_string(k));
  kv.set("widths", join(widths));
  kv.set("fov_horizontal_half_deg", format_double(fov.horizontal_half_deg));
  kv.set("fov_vertical_half_deg", format_double(fov.vertical_half_deg));
  kv.set("fov_near", format_double(fov.near));
  kv.set("tau", format_double(tau));
  kv.set("freq_threshold", std::to_string(freq_threshold));
  kv.set("seed", std::to_string(seed));
  kv.set("steps", std::to_string(steps));
  kv.set("lr", format_double(lr));
  kv.set("dropout", format_double(dropout));
  kv.set("test_frames", std::to_string(test_frames));
  kv.set("traj_hidden", std::to_string(traj_hidden));
  kv.set("traj_window", std::to_string(traj_window));
  kv.set("traj_steps", std::to_string(traj_steps));
  kv.set("traj_lr", format_double(traj_lr));
  if (!scene.empty()) kv.set("scene", scene);
  return kv;
}

PipelineConfig PipelineConfig::from_kv(const KeyValueFile& kv) {
  PipelineConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"tiles", [&](auto& v, auto& k) { c.tiles = as_size(v, k); }},
      {"grid",
       [&](auto& v, auto& k) {
         const auto g = parse_longs(v, k);
         if (g.size() != 3) throw ParseError("'grid' needs 3 integers");
         c.grid = {static_cast<int>(g[0]), static_cast<int>(g[1]), static_cast<int>(g[2])};
       }},
      {"points", [&](auto& v, auto& k) { c.points = as_size(v, k); }},
      {"cubes", [&](auto& v, auto& k) { c.cubes = as_size(v, k); }},
      {"batch", [&](auto& v, auto& k) { c.batch = as_size(v, k); }},
      {"k", [&](auto& v, auto& k) { c.k = as_size(v, k); }},
      {"widths",
       [&](auto& v, auto& k) {
         c.widths.clear();
         for (const long w : parse_longs(v, k)) {
           if (w < 0) throw ParseError("'widths' must be non-negative");
           c.widths.push_back(static_cast<std::size_t>(w));
         }
       }},
      {"fov_horizontal_half_deg", [&](auto& v, auto& k) { c.fov.horizontal_half_deg = as_double(v, k); }},
      {"fov_vertical_half_deg", [&](auto& v, auto& k) { c.fov.vertical_half_deg = as_double(v, k); }},
      {"fov_near", [&](auto& v, auto& k) { c.fov.near = as_double(v, k); }},
      {"tau", [&](auto& v, auto& k) { c.tau = as_double(v, k); }},
      {"freq_threshold", [&](auto& v, auto& k) { c.freq_threshold = static_cast<int>(as_size(v, k)); }},
      {"seed", [&](auto& v, auto& k) { c.seed = as_u64(v, k); }},
      {"steps", [&](auto& v, auto& k) { c.steps = as_size(v, k); }},
      {"lr", [&](auto& v, auto& k) { c.lr = as_double(v, k); }},
      {"dropout", [&](auto& v, auto& k) { c.dropout = as_double(v, k); }},
      {"test_frames", [&](auto& v, auto& k) { c.test_frames = as_size(v, k); }},
      {"traj_hidden", [&](auto& v, auto& k) { c.traj_hidden = as_size(v, k); }},
      {"traj_window", [&](auto& v, auto& k) { c.traj_window = as_size(v, k); }},
      {"traj_steps", [&](auto& v, auto& k) { c.traj_steps = as_size(v, k); }},
      {"traj_lr", [&](auto& v, auto& k) { c.traj_lr = as_double(v, k); }},
      {"scene", [&](auto& v, auto&) { c.scene = v; }},
  };
  for (const auto& [key, value] : kv.entries) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ParseError("unknown config key '" + key + "'");
    it->second(value, key);
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  try {
    return from_kv(KeyValueFile::read(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace voxport
