#pragma once

#include <filesystem>

#include "voxport/ad/tensor.hpp"

namespace voxport::ad {

/// Binary parameter file: "VXPCKPT\0", u32 version, u32 count, then per
/// record u32 name length, name bytes, u32 rank, u64 dims, f64 values.
/// All integers and floats little-endian.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store);
ParamStore load_checkpoint(const std::filesystem::path& path);
/// Overwrites values in `store`; names and shapes must match exactly.
void load_checkpoint_into(const std::filesystem::path& path, ParamStore& store);

}  // namespace voxport::ad
