#include "latdiff/evalkit/metrics.hpp"

namespace latdiff {

ConfusionCounts confusion(const ChangeMask& pred, const ChangeMask& truth) {
  if (pred.h != truth.h || pred.w != truth.w)
    fail(ErrorKind::ShapeMismatch, "confusion: prediction is " +
                                       std::to_string(pred.h) + "x" +
                                       std::to_string(pred.w) + ", truth is " +
                                       std::to_string(truth.h) + "x" +
                                       std::to_string(truth.w));
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0;
    const bool t = truth.data[i] != 0;
    if (p && t)
      ++c.tp;
    else if (p && !t)
      ++c.fp;
    else if (!p && t)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double iou(const ConfusionCounts& c) {
  const auto denom = c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;  // both masks empty: perfect agreement
  return static_cast<double>(c.tp) / static_cast<double>(denom);
}

double f1(const ConfusionCounts& c) {
  const auto denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

}  // namespace latdiff
