#pragma once

#include <string>

#include "latdiff/dataio/image.hpp"

namespace latdiff {

// Raw tensor container (.rten): one JSON header line
// {"dims":[H,W,C],"dtype":"f32","channels":[...]} terminated by '\n', then a
// little-endian float32 payload in row-major (H, W, C) order.
ImagePlane read_rten(const std::string& path);
void write_rten(const ImagePlane& image, const std::string& path);

}  // namespace latdiff
