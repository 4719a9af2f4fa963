#pragma once

#include <cstdint>

#include "latdiff/dataio/image.hpp"

namespace latdiff {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

ConfusionCounts confusion(const ChangeMask& pred, const ChangeMask& gt);

// Both defined as 1.0 when tp+fp+fn = 0 (a correct empty prediction is
// perfect).
double iou(const ConfusionCounts& c);
double f1(const ConfusionCounts& c);

}  // namespace latdiff
