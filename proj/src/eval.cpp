#include "voxport/eval.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include "voxport/csv.hpp"
#include "voxport/errors.hpp"

namespace voxport {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("confusion: " + std::to_string(pred.size()) + " predictions for " +
                                std::to_string(gt.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ConfusionCounts confusion(const FovLabels& pred, const FovLabels& gt) { return confusion(pred.labels, gt.labels); }

PointMetrics point_metrics(const ConfusionCounts& c) {
  const std::size_t total = c.total();
  if (total == 0) throw std::invalid_argument("point_metrics: no samples");
  PointMetrics m;
  m.oa = static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
  if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  double iou_sum = 0.0;
  int classes = 0;
  for (const auto& [inter, uni] : {std::pair{c.tp, c.tp + c.fp + c.fn}, std::pair{c.tn, c.tn + c.fp + c.fn}}) {
    if (uni == 0) continue;
    iou_sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++classes;
  }
  m.miou = iou_sum / classes;
  return m;
}

TileEvaluation tile_evaluation(const FovLabels& pred, const FovLabels& gt, const TiledFrame& tiling, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tile tau must be in (0, 1]");
  if (pred.labels.size() != gt.labels.size()) throw std::invalid_argument("tile_evaluation: label length mismatch");
  TileEvaluation out;
  for (std::size_t t = 0; t < tiling.tiles.size(); ++t) {
    const auto& members = tiling.tiles[t];
    if (members.empty()) {
      ++out.empty_tiles;
      continue;
    }
    std::size_t p = 0, g = 0;
    for (const std::size_t i : members) {
      if (i >= gt.labels.size()) throw std::invalid_argument("tile_evaluation: labels do not cover the tiling");
      p += pred.labels[i] != 0;
      g += gt.labels[i] != 0;
    }
    TileRow row;
    row.frame = gt.frame_index;
    row.tile = static_cast<int>(t);
    row.points = members.size();
    row.pred_fraction = static_cast<double>(p) / static_cast<double>(members.size());
    row.gt_fraction = static_cast<double>(g) / static_cast<double>(members.size());
    row.pred_label = row.pred_fraction >= tau;
    row.gt_label = row.gt_fraction >= tau;
    const std::uint8_t pl[1] = {row.pred_label}, gl[1] = {row.gt_label};
    out.counts += confusion(pl, gl);
    out.rows.push_back(row);
  }
  return out;
}

EvalReport evaluate(std::span<const FovLabels> pred, std::span<const FovLabels> gt,
                    std::span<const TiledFrame> tilings, double tau) {
  if (pred.size() != gt.size() || gt.size() != tilings.size()) {
    throw std::invalid_argument("evaluate: frame counts differ");
  }
  if (gt.empty()) throw std::invalid_argument("evaluate: no frames");
  EvalReport r;
  r.frames = gt.size();
  ConfusionCounts points, tiles;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    points += confusion(pred[f], gt[f]);
    auto te = tile_evaluation(pred[f], gt[f], tilings[f], tau);
    tiles += te.counts;
    r.empty_tiles += te.empty_tiles;
    r.tile_rows.insert(r.tile_rows.end(), te.rows.begin(), te.rows.end());
  }
  r.points = points.total();
  r.point = point_metrics(points);
  r.tiles = tiles.total();
  if (r.tiles > 0) r.tile_miou = point_metrics(tiles).miou;
  return r;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string field(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

}  // namespace

void write_report_csv(const std::filesystem::path& path, const EvalReport& r) {
  auto out = open_out(path);
  out << "frames,points,oa,precision,recall,point_miou,tile_miou,tiles,empty_tiles\n";
  out << r.frames << ',' << r.points << ',' << format_double(r.point.oa) << ',' << field(r.point.precision) << ','
      << field(r.point.recall) << ',' << format_double(r.point.miou) << ',' << field(r.tile_miou) << ',' << r.tiles
      << ',' << r.empty_tiles << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void write_tile_table_csv(const std::filesystem::path& path, std::span<const TileRow> rows) {
  auto out = open_out(path);
  out << "frame,tile,points,pred_fraction,gt_fraction,pred_label,gt_label\n";
  for (const auto& r : rows) {
    out << r.frame << ',' << r.tile << ',' << r.points << ',' << format_double(r.pred_fraction) << ','
        << format_double(r.gt_fraction) << ',' << int(r.pred_label) << ',' << int(r.gt_label) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace voxport
