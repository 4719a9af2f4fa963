#pragma once

#include <string>

#include "latdiff/dataio/image.hpp"

namespace latdiff {

// 8-bit PNG, grayscale or RGB. Values map linearly: byte b -> b/255 on read,
// round(clamp(v, 0, 1) * 255) on write.
ImagePlane read_png(const std::string& path);
void write_png(const ImagePlane& image, const std::string& path);

// Mask convention: byte >= 128 is change. Written as 0/255 grayscale.
ChangeMask read_mask_png(const std::string& path);
void write_mask_png(const ChangeMask& mask, const std::string& path);

}  // namespace latdiff
