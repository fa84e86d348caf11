#pragma once

#include <filesystem>

#include "voxport/core.hpp"

namespace voxport {

enum class PlyFormat { ascii, binary_little_endian };

/// Reads a vertex-only PLY with float x,y,z and uchar red,green,blue.
///
/// Positions are stored as f32 on disk and widened to f64 on load, so a
/// save/load round trip is exact for positions representable in f32.
/// The frame index is restored from a `comment frame_index <t>` line when
/// present, otherwise `frame_index` is used.
///
/// Throws ParseError (names the offending header line), UnsupportedFormatError
/// for other encodings or property layouts, CorruptFileError for a truncated
/// body and IoError when the file cannot be opened.
PointCloudFrame load_ply(const std::filesystem::path& path, std::size_t frame_index = 0);

void save_ply(const std::filesystem::path& path, const PointCloudFrame& frame,
              PlyFormat format = PlyFormat::binary_little_endian);

}  // namespace voxport
