#include "voxport/ply.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "voxport/errors.hpp"

namespace voxport {
namespace {

enum class Field { x, y, z, red, green, blue };

struct Header {
  PlyFormat format = PlyFormat::ascii;
  std::size_t vertex_count = 0;
  std::vector<Field> layout;
  std::optional<std::size_t> frame_index;
};

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, int line_no, const std::string& line,
                             const std::string& why) {
  std::ostringstream msg;
  msg << path.string() << ":" << line_no << ": " << why << " (line: \"" << line << "\")";
  throw ParseError(msg.str());
}

bool parse_size(const std::string& s, std::size_t& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

Header read_header(std::istream& in, const std::filesystem::path& path) {
  Header h;
  std::string line;
  int line_no = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next() || line != "ply") parse_fail(path, line_no, line, "missing 'ply' magic");

  bool have_format = false;
  bool in_vertex = false;
  bool have_vertex = false;
  while (true) {
    if (!next()) parse_fail(path, line_no, line, "header ended before end_header");
    const auto w = split_ws(line);
    if (w.empty()) continue;
    if (w[0] == "end_header") break;
    if (w[0] == "comment" || w[0] == "obj_info") {
      if (w.size() == 3 && w[1] == "frame_index") {
        std::size_t t = 0;
        if (parse_size(w[2], t)) h.frame_index = t;
      }
      continue;
    }
    if (w[0] == "format") {
      if (w.size() != 3) parse_fail(path, line_no, line, "format line needs 2 arguments");
      if (w[1] == "ascii") {
        h.format = PlyFormat::ascii;
      } else if (w[1] == "binary_little_endian") {
        h.format = PlyFormat::binary_little_endian;
      } else if (w[1] == "binary_big_endian") {
        throw UnsupportedFormatError(path.string() + ": binary_big_endian PLY is not supported");
      } else {
        parse_fail(path, line_no, line, "unknown format '" + w[1] + "'");
      }
      have_format = true;
      continue;
    }
    if (w[0] == "element") {
      if (w.size() != 3) parse_fail(path, line_no, line, "element line needs name and count");
      std::size_t count = 0;
      if (!parse_size(w[2], count)) parse_fail(path, line_no, line, "element count is not a number");
      if (w[1] == "vertex") {
        if (have_vertex) parse_fail(path, line_no, line, "duplicate vertex element");
        h.vertex_count = count;
        in_vertex = true;
        have_vertex = true;
      } else {
        throw UnsupportedFormatError(path.string() + ": element '" + w[1] +
                                     "' is not supported (vertex-only files)");
      }
      continue;
    }
    if (w[0] == "property") {
      if (!in_vertex) parse_fail(path, line_no, line, "property outside an element");
      if (w.size() >= 2 && w[1] == "list") {
        throw UnsupportedFormatError(path.string() + ": list properties are not supported");
      }
      if (w.size() != 3) parse_fail(path, line_no, line, "property line needs type and name");
      const std::string& type = w[1];
      const std::string& name = w[2];
      const bool is_float = type == "float" || type == "float32";
      const bool is_uchar = type == "uchar" || type == "uint8";
      Field f;
      if (name == "x" || name == "y" || name == "z") {
        if (!is_float) {
          throw UnsupportedFormatError(path.string() + ": property " + name + " must be float, got " + type);
        }
        f = name == "x" ? Field::x : (name == "y" ? Field::y : Field::z);
      } else if (name == "red" || name == "green" || name == "blue") {
        if (!is_uchar) {
          throw UnsupportedFormatError(path.string() + ": property " + name + " must be uchar, got " + type);
        }
        f = name == "red" ? Field::red : (name == "green" ? Field::green : Field::blue);
      } else {
        throw UnsupportedFormatError(path.string() + ": unsupported vertex property '" + name + "'");
      }
      for (auto seen : h.layout) {
        if (seen == f) parse_fail(path, line_no, line, "duplicate property '" + name + "'");
      }
      h.layout.push_back(f);
      continue;
    }
    parse_fail(path, line_no, line, "unrecognized header keyword '" + w[0] + "'");
  }
  if (!have_format) throw ParseError(path.string() + ": header has no format line");
  if (!have_vertex) throw ParseError(path.string() + ": header has no vertex element");
  if (h.layout.size() != 6) {
    throw UnsupportedFormatError(path.string() +
                                 ": vertex must declare exactly x,y,z (float) and red,green,blue (uchar)");
  }
  return h;
}

void assign(Point& p, Field f, float v) {
  switch (f) {
    case Field::x: p.position.x = v; break;
    case Field::y: p.position.y = v; break;
    case Field::z: p.position.z = v; break;
    default: break;
  }
}

void assign(Point& p, Field f, std::uint8_t v) {
  switch (f) {
    case Field::red: p.color.r = v; break;
    case Field::green: p.color.g = v; break;
    case Field::blue: p.color.b = v; break;
    default: break;
  }
}

bool is_position(Field f) { return f == Field::x || f == Field::y || f == Field::z; }

float load_f32_le(const unsigned char* src) {
  std::uint32_t bits;
  std::memcpy(&bits, src, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return std::bit_cast<float>(bits);
}

void store_f32_le(float v, std::ostream& out) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  out.write(reinterpret_cast<const char*>(&bits), 4);
}

}  // namespace

PointCloudFrame load_ply(const std::filesystem::path& path, std::size_t frame_index) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const Header h = read_header(in, path);

  PointCloudFrame frame;
  frame.frame_index = h.frame_index.value_or(frame_index);
  frame.points.resize(h.vertex_count);

  if (h.format == PlyFormat::binary_little_endian) {
    std::size_t stride = 0;
    for (auto f : h.layout) stride += is_position(f) ? 4 : 1;
    std::vector<unsigned char> body(stride * h.vertex_count);
    in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(body.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != body.size()) {
      std::ostringstream msg;
      msg << path.string() << ": truncated body, header declares " << h.vertex_count << " vertices but only "
          << got / stride << " are present";
      throw CorruptFileError(msg.str());
    }
    const unsigned char* src = body.data();
    for (auto& p : frame.points) {
      for (auto f : h.layout) {
        if (is_position(f)) {
          assign(p, f, load_f32_le(src));
          src += 4;
        } else {
          assign(p, f, *src++);
        }
      }
    }
    return frame;
  }

  std::string line;
  std::size_t row = 0;
  while (row < h.vertex_count && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto w = split_ws(line);
    if (w.empty()) continue;
    if (w.size() != h.layout.size()) {
      std::ostringstream msg;
      msg << path.string() << ": vertex " << row << " has " << w.size() << " values, expected "
          << h.layout.size();
      throw CorruptFileError(msg.str());
    }
    Point& p = frame.points[row];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const auto* first = w[k].data();
      const auto* last = first + w[k].size();
      if (is_position(h.layout[k])) {
        float v = 0.0f;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) {
          throw CorruptFileError(path.string() + ": bad float '" + w[k] + "' at vertex " + std::to_string(row));
        }
        assign(p, h.layout[k], v);
      } else {
        unsigned v = 0;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last || v > 255) {
          throw CorruptFileError(path.string() + ": bad color '" + w[k] + "' at vertex " + std::to_string(row));
        }
        assign(p, h.layout[k], static_cast<std::uint8_t>(v));
      }
    }
    ++row;
  }
  if (row != h.vertex_count) {
    std::ostringstream msg;
    msg << path.string() << ": truncated body, header declares " << h.vertex_count << " vertices but only "
        << row << " are present";
    throw CorruptFileError(msg.str());
  }
  return frame;
}

void save_ply(const std::filesystem::path& path, const PointCloudFrame& frame, PlyFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\n"
      << "format " << (format == PlyFormat::ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
      << "comment frame_index " << frame.frame_index << "\n"
      << "element vertex " << frame.points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  if (format == PlyFormat::binary_little_endian) {
    for (const auto& p : frame.points) {
      store_f32_le(static_cast<float>(p.position.x), out);
      store_f32_le(static_cast<float>(p.position.y), out);
      store_f32_le(static_cast<float>(p.position.z), out);
      const std::array<char, 3> rgb{static_cast<char>(p.color.r), static_cast<char>(p.color.g),
                                    static_cast<char>(p.color.b)};
      out.write(rgb.data(), 3);
    }
  } else {
    std::array<char, 64> buf{};
    for (const auto& p : frame.points) {
      for (std::size_t a = 0; a < 3; ++a) {
        auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), static_cast<float>(p.position[a]));
        out.write(buf.data(), ptr - buf.data());
        out << ' ';
      }
      out << unsigned{p.color.r} << ' ' << unsigned{p.color.g} << ' ' << unsigned{p.color.b} << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace voxport
