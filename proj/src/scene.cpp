#include "voxport/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "voxport/ply.hpp"
#include "voxport/random.hpp"

namespace voxport {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint8_t clamp_channel(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

// Uniform points on the six faces of an axis-aligned box, by face area.
void box_surface(const Box& b, std::size_t count, Color base, double jitter, Rng& rng, std::vector<Point>& out) {
  const Vec3 e = b.extent();
  const double areas[3] = {e.y * e.z, e.x * e.z, e.x * e.y};  // faces normal to x, y, z
  const double total = 2.0 * (areas[0] + areas[1] + areas[2]);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> shade(0.0, jitter);
  for (std::size_t i = 0; i < count; ++i) {
    double pick = u(rng) * total;
    int axis = 0;
    while (axis < 2 && pick >= 2.0 * areas[axis]) pick -= 2.0 * areas[axis++];
    const bool high = pick >= areas[axis];
    Vec3 p{b.min.x + u(rng) * e.x, b.min.y + u(rng) * e.y, b.min.z + u(rng) * e.z};
    p[axis] = high ? b.max[axis] : b.min[axis];
    const double s = shade(rng);
    out.push_back({p, {clamp_channel(base.r + s), clamp_channel(base.g + s), clamp_channel(base.b + s)}});
  }
}

}  // namespace

HeadState look_at(Vec3 eye, Vec3 target) {
  const Vec3 d = target - eye;
  const double len = norm(d);
  if (len == 0.0) throw std::invalid_argument("look_at: eye equals target");
  HeadState s;
  s.position = eye;
  s.alpha = -std::asin(d.y / len) * 180.0 / kPi;
  s.beta = std::atan2(d.x, d.z) * 180.0 / kPi;
  return s;
}

SyntheticScene generate_scene(const SyntheticSceneSpec& spec) {
  if (spec.frames == 0) throw std::invalid_argument("scene needs at least one frame");
  if (spec.users == 0) throw std::invalid_argument("scene needs at least one user");
  const Vec3 ext = spec.room.extent();
  if (!(ext.x > 0 && ext.y > 0 && ext.z > 0)) throw std::invalid_argument("room box must have positive extent");

  std::vector<Point> fixed;
  Rng shell_rng(derive_seed(spec.seed, {1}));
  const double shell_area = 2.0 * (ext.x * ext.y + ext.x * ext.z + ext.y * ext.z);
  box_surface(spec.room, static_cast<std::size_t>(std::lround(shell_area * spec.shell_density)), {180, 175, 165}, 12.0,
              shell_rng, fixed);

  Rng obj_rng(derive_seed(spec.seed, {2}));
  std::uniform_real_distribution<double> ux(spec.room.min.x + 0.5, spec.room.max.x - 1.0);
  std::uniform_real_distribution<double> uz(spec.room.min.z + 0.5, spec.room.max.z - 1.0);
  std::uniform_real_distribution<double> size(0.3, 0.8);
  std::uniform_int_distribution<int> channel(40, 200);
  for (std::size_t o = 0; o < spec.static_objects; ++o) {
    const Vec3 lo{ux(obj_rng), spec.room.min.y, uz(obj_rng)};
    const Vec3 hi = lo + Vec3{size(obj_rng), size(obj_rng), size(obj_rng)};
    // Muted palette so the moving cube stays the only saturated object.
    const int g = channel(obj_rng);
    box_surface({lo, hi}, spec.object_points, {std::uint8_t(g), std::uint8_t(g * 0.9), std::uint8_t(g * 0.8)}, 8.0,
                obj_rng, fixed);
  }

  std::vector<Point> cube;
  Rng cube_rng(derive_seed(spec.seed, {3}));
  const double h = spec.moving_size / 2.0;
  box_surface({{-h, -h, -h}, {h, h, h}}, spec.moving_points, spec.moving_color, 6.0, cube_rng, cube);

  SyntheticScene scene;
  scene.grid = spec.grid;
  Rng view_rng(derive_seed(spec.seed, {4}));
  std::normal_distribution<double> jitter(0.0, spec.noise_deg);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const Vec3 center = spec.moving_start + static_cast<double>(t) * spec.velocity;
    PointCloudFrame f;
    f.frame_index = t;
    f.points = fixed;
    for (const auto& p : cube) f.points.push_back({p.position + center, p.color});
    scene.frames.push_back(std::move(f));

    for (std::size_t u = 0; u < spec.users; ++u) {
      const double phase = 2.0 * kPi * static_cast<double>(u) / static_cast<double>(spec.users);
      Vec3 eye;
      if (spec.path == ViewerPath::orbit) {
        const double a = phase + 0.12 * static_cast<double>(t);
        eye = spec.viewer_center + Vec3{spec.viewer_spread * std::cos(a), 0.1 * std::sin(a), spec.viewer_spread * std::sin(a)};
      } else {
        eye = spec.viewer_center + Vec3{spec.viewer_spread * std::cos(phase) + 0.05 * static_cast<double>(t), 0.0,
                                        spec.viewer_spread * std::sin(phase)};
      }
      HeadState s = look_at(eye, center);
      s.alpha += jitter(view_rng);
      s.beta += jitter(view_rng);
      s.gamma += jitter(view_rng);
      scene.trajectories.push_back({t, static_cast<int>(u), normalize_angles(s)});
    }
  }
  // Frames are stored as float32; keep the in-memory scene identical to the files.
  for (auto& f : scene.frames) {
    for (auto& p : f.points) {
      for (std::size_t a = 0; a < 3; ++a) p.position[a] = static_cast<float>(p.position[a]);
    }
  }
  scene.bbox = bounding_box(std::span<const PointCloudFrame>(scene.frames));
  return scene;
}

std::pair<PointCloudFrame, PointCloudFrame> translated_pair(std::size_t n, Vec3 shift, double color_noise,
                                                            std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> c(0, 255);
  PointCloudFrame a, b;
  a.frame_index = 0;
  b.frame_index = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p{g(rng), 0.6 * g(rng), 0.8 * g(rng)};
    a.points.push_back({p, {std::uint8_t(c(rng)), std::uint8_t(c(rng)), std::uint8_t(c(rng))}});
  }
  b.points = a.points;
  for (auto& p : b.points) {
    p.position = p.position + shift;
    p.color = {clamp_channel(p.color.r + color_noise * g(rng)), clamp_channel(p.color.g + color_noise * g(rng)),
               clamp_channel(p.color.b + color_noise * g(rng))};
  }
  std::shuffle(b.points.begin(), b.points.end(), rng);
  return {a, b};
}

SequenceManifest write_scene(const SyntheticScene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SequenceManifest m;
  for (const auto& f : scene.frames) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03zu.ply", f.frame_index);
    save_ply(dir / name, f, PlyFormat::binary_little_endian);
    m.frames.push_back(dir / name);
  }
  m.global_bbox = scene.bbox;
  m.grid = scene.grid;
  m.trajectory = dir / "trajectory.csv";
  write_trajectory_csv(m.trajectory, scene.trajectories);
  m.write(dir / "manifest.txt");
  return m;
}

}  // namespace voxport
