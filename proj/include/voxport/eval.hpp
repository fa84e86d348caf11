#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "voxport/core.hpp"
#include "voxport/viewport.hpp"

namespace voxport {

/// Class 1 (in FoV) is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Throws std::invalid_argument on a length mismatch.
ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt);
ConfusionCounts confusion(const FovLabels& pred, const FovLabels& gt);

/// Precision and recall are empty when their denominator is zero. MIoU
/// averages the per-class IoU over the classes whose union is non-empty.
struct PointMetrics {
  double oa = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  double miou = 0.0;
};

/// Throws std::invalid_argument when the counts are all zero.
PointMetrics point_metrics(const ConfusionCounts& c);

struct TileRow {
  std::size_t frame = 0;
  int tile = 0;
  std::size_t points = 0;
  double pred_fraction = 0.0;
  double gt_fraction = 0.0;
  std::uint8_t pred_label = 0;
  std::uint8_t gt_label = 0;
};

struct TileEvaluation {
  std::vector<TileRow> rows;  // non-empty tiles only
  std::size_t empty_tiles = 0;
  ConfusionCounts counts;
};

/// A tile is positive iff its in-FoV fraction is at least `tau`; empty tiles
/// are left out of both sides. Throws std::invalid_argument unless
/// 0 < tau <= 1 and the labels cover every tiled point.
TileEvaluation tile_evaluation(const FovLabels& pred, const FovLabels& gt, const TiledFrame& tiling, double tau);

struct EvalReport {
  std::size_t frames = 0;
  std::size_t points = 0;
  PointMetrics point;
  std::optional<double> tile_miou;  // empty when every tile was empty
  std::size_t tiles = 0;
  std::size_t empty_tiles = 0;
  std::vector<TileRow> tile_rows;
};

/// Pools confusion counts over all frames. pred[i], gt[i] and tilings[i]
/// describe the same frame.
EvalReport evaluate(std::span<const FovLabels> pred, std::span<const FovLabels> gt,
                    std::span<const TiledFrame> tilings, double tau);

/// `frames,points,oa,precision,recall,point_miou,tile_miou,tiles,empty_tiles`;
/// absent values are written as NA.
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);
/// `frame,tile,points,pred_fraction,gt_fraction,pred_label,gt_label`.
void write_tile_table_csv(const std::filesystem::path& path, std::span<const TileRow> rows);

}  // namespace voxport
