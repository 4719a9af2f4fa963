#pragma once

#include "latdiff/dataio/image.hpp"

namespace latdiff {

// RGB error rendering: TP white, FN red, FP green, TN black. Values are 0/1
// floats; the PNG writer maps them to 0/255 exactly.
ImagePlane render_error_map(const ChangeMask& pred, const ChangeMask& gt);

}  // namespace latdiff
