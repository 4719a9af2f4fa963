#include "latdiff/evalkit/error_map.hpp"

namespace latdiff {

ImagePlane render_error_map(const ChangeMask& pred, const ChangeMask& truth) {
  if (pred.h != truth.h || pred.w != truth.w)
    fail(ErrorKind::ShapeMismatch, "render_error_map: mask sizes differ");
  ImagePlane out = make_image(pred.h, pred.w, 3);
  out.channel_names = {"R", "G", "B"};
  for (int y = 0; y < pred.h; ++y) {
    for (int x = 0; x < pred.w; ++x) {
      const bool p = pred.at(y, x) != 0;
      const bool t = truth.at(y, x) != 0;
      Real r = 0, g = 0, b = 0;
      if (p && t) {
        r = g = b = 1;  // hit: white
      } else if (!p && t) {
        r = 1;  // miss: red
      } else if (p && !t) {
        g = 1;  // false alarm: green
      }
      out.data.at(y, x, 0) = r;
      out.data.at(y, x, 1) = g;
      out.data.at(y, x, 2) = b;
    }
  }
  return out;
}

}  // namespace latdiff
