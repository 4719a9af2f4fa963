#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latdiff/core/tensor.hpp"

namespace latdiff {

// Real-valued raster, (H, W, C) row-major. channel_names is optional; when
// present its length must equal C.
struct ImagePlane {
  Tensor<Real> data;
  std::vector<std::string> channel_names;

  int height() const { return data.dims.empty() ? 0 : data.dims[0]; }
  int width() const { return data.dims.size() < 2 ? 0 : data.dims[1]; }
  int channels() const { return data.dims.size() < 3 ? 0 : data.dims[2]; }

  void validate(const std::string& what) const;
};

ImagePlane make_image(int h, int w, int c);

// Binary change mask, (H, W), values in {0, 1}.
struct ChangeMask {
  int h = 0, w = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
  std::size_t size() const { return data.size(); }
  std::size_t positive_count() const;
};

ChangeMask make_mask(int h, int w);

// (H, W) tensor of {0, 1} values, the form losses consume.
Tensor<Real> mask_to_tensor(const ChangeMask& m);

struct BitemporalSample {
  ImagePlane pre;
  ImagePlane post;
  ChangeMask mask;
  std::string id;

  void validate() const;
};

// Per-channel standardization statistics.
struct ChannelStats {
  std::vector<Real> mean;
  std::vector<Real> std;
};

// Population statistics over a set of images (all must share channel count).
ChannelStats compute_stats(const std::vector<ImagePlane>& images);

// (value - mean) / std channelwise. Throws ZeroStd if any std <= 0.
ImagePlane normalize(const ImagePlane& image, const ChannelStats& stats);

// (NIR - SWIR) / (NIR + SWIR) per pixel; zero denominator maps to 0. Output
// is a single-channel plane named "NBR".
ImagePlane compute_nbr(const ImagePlane& image, int nir_channel,
                       int swir_channel);

}  // namespace latdiff
