#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxport/ad/ops.hpp"
#include "voxport/core.hpp"
#include "voxport/random.hpp"

namespace voxport {

enum class Branch { spatial, temporal, trajectory, fused_saliency, fused };

/// Per-point feature rows tagged with the branch that produced them.
struct FeatureMap {
  Branch branch = Branch::spatial;
  ad::Var features;
};

struct SaliencyConfig {
  // widths[0] is the initial feature width, widths[c] the output of level c.
  std::vector<std::size_t> widths{8, 32, 128, 256, 512, 1024};
  std::size_t k = 16;

  std::size_t levels() const { return widths.size() - 1; }
  /// 1/4 per level, 1/2 at the last level.
  double keep_ratio(std::size_t level) const;
};

/// Width of the raw neighbor descriptor: p_i, p_k, p_i - p_k, |p_i - p_k|,
/// d_i, d_k, d_i - d_k, |d_i - d_k|.
inline constexpr std::size_t kDescriptorWidth = 14;

/// One resolution of the encoder's point set, with everything that depends
/// only on geometry precomputed.
struct HierarchyLevel {
  std::vector<Vec3> positions;
  std::vector<double> grays;             // scaled to [0, 1]
  std::vector<std::size_t> kept;         // rows of the previous level that survived RS
  std::vector<std::size_t> upsample;     // per previous-level point: nearest point here
  std::size_t k = 0;                     // neighbors per point, min(config k, count)
  std::vector<std::size_t> neighbors;    // count * k rows into this level
  ad::Tensor descriptors;                // [count * k, 14]
};

struct PointHierarchy {
  std::vector<HierarchyLevel> levels;  // levels[0] is the full sampled set

  std::vector<std::size_t> counts() const;
};

/// Level counts for `n` input points: ceil(count * ratio) per level, at least 1.
std::vector<std::size_t> level_counts(std::size_t n, const SaliencyConfig& cfg);

/// Raw neighbor descriptors of one point set; row i*k + j pairs point i with
/// its j-th neighbor.
ad::Tensor neighbor_descriptors(std::span<const Vec3> positions, std::span<const double> grays,
                                std::span<const std::size_t> neighbors, std::size_t k);

/// Seeded uniform subset without replacement, ascending.
std::vector<std::size_t> rs_keep_indices(std::size_t count, double ratio, std::uint64_t seed);

/// Builds all levels for one sampled tile. RS at level c uses
/// derive_seed(seed, {c}).
PointHierarchy build_hierarchy(std::span<const Vec3> positions, std::span<const double> grays,
                               const SaliencyConfig& cfg, std::uint64_t seed);

/// Same geometry with levels[0] relabelled: row i of the result is row
/// perm[i] of the source. Used to test order invariance.
PointHierarchy permute_hierarchy(const PointHierarchy& h, std::span<const std::size_t> perm);

/// Registers every saliency parameter (init FC, ldc.*, tc.*, dec.*).
void init_saliency_params(ad::ParamStore& store, const SaliencyConfig& cfg, Rng& rng);
void init_ldc_params(ad::ParamStore& store, const std::string& prefix, std::size_t w_in, std::size_t w_out,
                     Rng& rng);

/// Network input rows: position (3) followed by color / 255 (3).
ad::Tensor point_inputs(std::span<const Vec3> positions, std::span<const Color> colors);

/// FC from the 6 input columns to widths[0].
ad::Var initial_features(ad::Tape& tape, const ad::Tensor& inputs, const ad::ParamStore& store,
                         const std::string& prefix = "init.fc");

/// Encoded discrepancies concatenated with gathered neighbor features:
/// [count * k, h + w_x].
ad::Var neighborhood_encode(ad::Tape& tape, const HierarchyLevel& level, const ad::Var& features,
                            const ad::ParamStore& store, const std::string& prefix);

/// Scores through a shared dense layer, softmax over each group of k rows,
/// weighted sum: [count * k, d] -> [count, d].
ad::Var attention_pool(ad::Tape& tape, const ad::Var& enhanced, std::size_t k, const ad::ParamStore& store,
                       const std::string& prefix);

/// Two encode/pool rounds plus a dense shortcut, summed then leaky-relu.
/// Throws std::invalid_argument when `k` exceeds the level's point count.
ad::Var ldc_forward(ad::Tape& tape, const HierarchyLevel& level, const ad::Var& features,
                    const ad::ParamStore& store, const std::string& prefix);

struct RsResult {
  std::vector<Vec3> positions;
  ad::Var features;
  std::vector<std::size_t> kept;
};
RsResult rs_downsample(std::span<const Vec3> positions, const ad::Var& features, double ratio, std::uint64_t seed);

struct TcResult {
  ad::Var c_t;
  ad::Var o_s;  // [1]
};

/// Max-pools both maps, scores the concatenated globals to a scalar s and
/// scales tc_t by G(s). Throws ShapeError on a width mismatch.
TcResult tc_forward(ad::Tape& tape, const ad::Var& tc_t, const ad::Var& tc_prev, const ad::ParamStore& store,
                    const std::string& prefix);

/// Encoder features per level: [0] initial, [c] level c after RS.
std::vector<ad::Var> encode(ad::Tape& tape, const PointHierarchy& h, const ad::Var& f0,
                            const ad::ParamStore& store, const SaliencyConfig& cfg);

struct PairEncoding {
  std::vector<ad::Var> spatial;   // skip stack of frame t
  std::vector<ad::Var> temporal;  // [0] = frame t initial features, [c] = C_t^c
  std::vector<ad::Var> intensity; // O_s per level, index c - 1
};

/// Spatial branch on frame t, encoder on frame t-1, and the TC cascade on
/// frame t's hierarchy.
PairEncoding encode_pair(ad::Tape& tape, const PointHierarchy& h_t, const ad::Tensor& inputs_t,
                         const PointHierarchy& h_prev, const ad::Tensor& inputs_prev, const ad::ParamStore& store,
                         const SaliencyConfig& cfg);

/// Nearest-neighbor upsampling through the hierarchy with skip concatenation
/// and a shared MLP per stage; output [N, widths[0]].
FeatureMap decode(ad::Tape& tape, const std::vector<ad::Var>& skips, const PointHierarchy& h,
                  const ad::ParamStore& store, const SaliencyConfig& cfg, Branch branch);

}  // namespace voxport
