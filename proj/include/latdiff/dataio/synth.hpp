#pragma once

#include <string>
#include <vector>

#include "latdiff/dataio/image.hpp"

namespace latdiff {

enum class ShapeKind { square, circle };

struct IntRange {
  int lo = 0, hi = 0;
};
struct RealRange {
  double lo = 0.0, hi = 0.0;
};

// Controllable generator: the change signal (planted shapes, recorded in the
// mask) and the nuisance signal (global brightness shift on the post image)
// are independent by construction.
struct SynthConfig {
  int image_size = 64;
  int n_samples = 64;
  int channels = 3;
  IntRange change_shape_count_range{1, 3};
  IntRange change_shape_size_range{6, 14};
  IntRange static_shape_count_range{2, 4};
  std::vector<ShapeKind> shape_kinds{ShapeKind::square, ShapeKind::circle};
  RealRange nuisance_brightness_range{-0.25, 0.25};
  double nuisance_texture_level = 0.02;
  // Per-channel amplitude of the planted change, drawn as sign * U(lo, hi).
  RealRange change_amplitude_range{0.25, 0.5};
  std::uint64_t seed = 0;
};

// Exact geometry of a planted shape, kept for rasterization oracles.
// Squares are axis-aligned with integer top-left corner (y0, x0) and side
// `size`; circles cover pixels whose centers satisfy
// (y + 0.5 - cy)^2 + (x + 0.5 - cx)^2 <= (size/2)^2.
struct PlantedShape {
  ShapeKind kind = ShapeKind::square;
  int y0 = 0, x0 = 0, size = 0;
  double cy = 0.0, cx = 0.0;
};

struct SynthResult {
  std::vector<BitemporalSample> samples;
  std::vector<double> nuisance_labels;          // aligned with samples
  std::vector<std::vector<PlantedShape>> change_shapes;  // aligned
};

// Deterministic: identical config (including seed) gives bitwise-identical
// output. Per-sample streams are derived from (seed, sample index).
SynthResult generate_synthetic(const SynthConfig& config);

// Writes samples + nuisance.json + splits.json (70/15/15 by index) +
// provenance.json carrying `provenance_json` verbatim when non-empty.
void save_synthetic(const SynthResult& result, const std::string& root,
                    const std::string& provenance_json = "");

}  // namespace latdiff
