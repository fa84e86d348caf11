// Python bindings: frames as (positions [N,3] float64, colors [N,3] uint8)
// array pairs, labels as uint8 arrays.

#include <algorithm>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "voxport/ad/ops.hpp"
#include "voxport/config.hpp"
#include "voxport/errors.hpp"
#include "voxport/eval.hpp"
#include "voxport/knn.hpp"
#include "voxport/ply.hpp"
#include "voxport/sampling.hpp"
#include "voxport/scene.hpp"
#include "voxport/viewport.hpp"

namespace py = pybind11;
using namespace voxport;

namespace {

using Positions = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Colors = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using Labels = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

std::vector<Point> to_points(const Positions& pos, const Colors& col) {
  if (pos.ndim() != 2 || pos.shape(1) != 3) throw ShapeError("positions must be [N, 3]");
  if (col.ndim() != 2 || col.shape(1) != 3 || col.shape(0) != pos.shape(0)) throw ShapeError("colors must be [N, 3]");
  const auto p = pos.unchecked<2>();
  const auto c = col.unchecked<2>();
  std::vector<Point> out(static_cast<std::size_t>(pos.shape(0)));
  for (py::ssize_t i = 0; i < pos.shape(0); ++i) {
    out[i] = {{p(i, 0), p(i, 1), p(i, 2)}, {c(i, 0), c(i, 1), c(i, 2)}};
  }
  return out;
}

py::tuple from_points(const std::vector<Point>& pts) {
  const auto n = static_cast<py::ssize_t>(pts.size());
  Positions pos({n, py::ssize_t{3}});
  Colors col({n, py::ssize_t{3}});
  auto p = pos.mutable_unchecked<2>();
  auto c = col.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i) {
    p(i, 0) = pts[i].position.x;
    p(i, 1) = pts[i].position.y;
    p(i, 2) = pts[i].position.z;
    c(i, 0) = pts[i].color.r;
    c(i, 1) = pts[i].color.g;
    c(i, 2) = pts[i].color.b;
  }
  return py::make_tuple(pos, col);
}

std::vector<std::uint8_t> to_labels(const Labels& a) {
  if (a.ndim() != 1) throw ShapeError("labels must be one-dimensional");
  return {a.data(), a.data() + a.size()};
}

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::object optional_double(const std::optional<double>& v) { return v ? py::object(py::float_(*v)) : py::object(py::none()); }

py::dict metrics_dict(const PointMetrics& m) {
  py::dict d;
  d["oa"] = m.oa;
  d["precision"] = optional_double(m.precision);
  d["recall"] = optional_double(m.recall);
  d["miou"] = m.miou;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Point-cloud sampling, viewport ground truth and metrics";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<InsufficientPointsError>(m, "InsufficientPointsError", PyExc_ValueError);
  py::register_exception<OutOfBoundsError>(m, "OutOfBoundsError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<CorruptFileError>(m, "CorruptFileError", PyExc_OSError);
  py::register_exception<UnsupportedFormatError>(m, "UnsupportedFormatError", PyExc_OSError);

  m.def("load_ply", [](const std::filesystem::path& p) { return from_points(load_ply(p).points); },
        "Reads a PLY frame as (positions, colors).", py::arg("path"));
  m.def(
      "save_ply",
      [](const std::filesystem::path& p, const Positions& pos, const Colors& col, bool binary) {
        PointCloudFrame f;
        f.points = to_points(pos, col);
        save_ply(p, f, binary ? PlyFormat::binary_little_endian : PlyFormat::ascii);
      },
      py::arg("path"), py::arg("positions"), py::arg("colors"), py::arg("binary") = true);

  m.def(
      "sample",
      [](const Positions& pos, const Colors& col, std::size_t n, const std::string& method, std::size_t cubes,
         std::uint64_t seed) {
        const auto pts = to_points(pos, col);
        return to_array(sample(pts, n, parse_sampling_method(method), cubes, seed).point_indices);
      },
      "Indices of n distinct points chosen by urs, fps, rs, idis, gs or vs.", py::arg("positions"),
      py::arg("colors"), py::arg("n"), py::arg("method") = "urs", py::arg("cubes") = 512, py::arg("seed") = 0);

  m.def(
      "ifmi",
      [](const Positions& pos_t, const Colors& col_t, const Positions& pos_prev, const Colors& col_prev,
         std::size_t n, const std::string& method, std::size_t cubes, std::uint64_t seed,
         const std::vector<double>& thresholds) {
        const auto t = to_points(pos_t, col_t), prev = to_points(pos_prev, col_prev);
        const auto mth = parse_sampling_method(method);
        const auto st = sample(t, n, mth, cubes, seed), sp = sample(prev, n, mth, cubes, seed);
        return ifmi_curve(t, st, prev, sp, thresholds, DacvvContext::from_tile(prev));
      },
      "IFMI of frame t against frame t-1, both sampled with the same method and seed.", py::arg("positions_t"),
      py::arg("colors_t"), py::arg("positions_prev"), py::arg("colors_prev"), py::arg("n"),
      py::arg("method") = "urs", py::arg("cubes") = 512, py::arg("seed") = 0,
      py::arg("thresholds") = std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5});

  m.def(
      "knn",
      [](const Positions& pos, const Positions& queries, std::size_t k) {
        if (pos.ndim() != 2 || pos.shape(1) != 3) throw ShapeError("positions must be [N, 3]");
        if (queries.ndim() != 2 || queries.shape(1) != 3) throw ShapeError("queries must be [M, 3]");
        std::vector<Vec3> pts(static_cast<std::size_t>(pos.shape(0)));
        const auto p = pos.unchecked<2>();
        for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {p(i, 0), p(i, 1), p(i, 2)};
        const KnnIndex index{std::span<const Vec3>(pts)};
        const auto q = queries.unchecked<2>();
        py::array_t<std::size_t> out({queries.shape(0), static_cast<py::ssize_t>(k)});
        auto o = out.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < queries.shape(0); ++i) {
          const auto nn = index.knn({q(i, 0), q(i, 1), q(i, 2)}, k);
          for (std::size_t j = 0; j < k; ++j) o(i, j) = nn[j];
        }
        return out;
      },
      "Exact k nearest neighbors, ties broken by lower index.", py::arg("positions"), py::arg("queries"), py::arg("k"));

  m.def("temporal_intensity", py::overload_cast<double>(&ad::temporal_intensity), py::arg("s"));

  m.def(
      "ground_truth",
      [](const Positions& pos, const std::vector<std::array<double, 6>>& users, int freq_threshold,
         double fov_h, double fov_v, double near) {
        if (pos.ndim() != 2 || pos.shape(1) != 3) throw ShapeError("positions must be [N, 3]");
        PointCloudFrame f;
        const auto p = pos.unchecked<2>();
        for (py::ssize_t i = 0; i < pos.shape(0); ++i) f.points.push_back({{p(i, 0), p(i, 1), p(i, 2)}, {}});
        std::vector<HeadState> states;
        for (const auto& u : users) states.push_back(HeadState::from_array(u));
        const FovParams fov{fov_h, fov_v, near};
        fov.validate();
        const auto labels = build_ground_truth(f, states, fov, freq_threshold).labels;
        return to_array(labels);
      },
      "Label 1 where at least freq_threshold users (X, Y, Z, alpha, beta, gamma) see the point.",
      py::arg("positions"), py::arg("users"), py::arg("freq_threshold") = 5, py::arg("fov_h") = 55.0,
      py::arg("fov_v") = 55.0, py::arg("near") = 0.05);

  m.def(
      "point_metrics",
      [](const Labels& pred, const Labels& gt) {
        const auto p = to_labels(pred), g = to_labels(gt);
        return metrics_dict(point_metrics(confusion(p, g)));
      },
      py::arg("pred"), py::arg("gt"));

  m.def(
      "generate_scene",
      [](const std::filesystem::path& dir, std::uint64_t seed, std::size_t frames, std::size_t users) {
        SyntheticSceneSpec spec;
        spec.seed = seed;
        spec.frames = frames;
        spec.users = users;
        write_scene(generate_scene(spec), dir);
        return dir / "manifest.txt";
      },
      "Writes the synthetic sequence and returns its manifest path.", py::arg("dir"), py::arg("seed") = 7,
      py::arg("frames") = 10, py::arg("users") = 8);

  m.def(
      "load_config", [](const std::filesystem::path& p) { return PipelineConfig::load(p).dump(); },
      "Validated config file, re-serialized with every key.", py::arg("path"));
}
