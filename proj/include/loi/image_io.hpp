#pragma once

#include <filesystem>

#include "loi/core.hpp"

namespace loi {

/// 8-bit grey or RGB PNG. Values map linearly to [0, 1]; no gamma handling.
/// Alpha channels are dropped, grey+alpha is read as grey.
ImageBuffer read_png(const std::filesystem::path& path);

/// Writes 8-bit PNG (grey for 1 channel, RGB for 3) with fixed encoder
/// settings, so identical buffers produce identical files. Values are
/// clamped to [0, 1] and rounded to nearest.
void write_png(const std::filesystem::path& path, const ImageBuffer& img);

}  // namespace loi
