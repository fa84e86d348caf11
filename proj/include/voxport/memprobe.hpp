#pragma once

#include <cstddef>

namespace voxport::memprobe {

/// True when the counting operator new is linked into this binary.
bool active();
std::size_t current_bytes();
/// Starts a new peak window at the current usage.
void reset_peak();
/// Highest usage since the last reset_peak().
std::size_t peak_bytes();

}  // namespace voxport::memprobe
