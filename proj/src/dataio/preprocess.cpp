#include <cmath>

#include "latdiff/dataio/image.hpp"

namespace latdiff {

void ImagePlane::validate(const std::string& what) const {
  if (data.dims.size() != 3 || data.dims[0] < 1 || data.dims[1] < 1 ||
      data.dims[2] < 1)
    fail(ErrorKind::ShapeMismatch, what + ": image must be (H,W,C), got " +
                                       data.shape_str());
  if (!data.all_finite())
    fail(ErrorKind::ShapeMismatch, what + ": non-finite pixel values");
  if (!channel_names.empty() &&
      static_cast<int>(channel_names.size()) != data.dims[2])
    fail(ErrorKind::ShapeMismatch,
         what + ": channel_names length does not match channel count");
}

ImagePlane make_image(int h, int w, int c) {
  ImagePlane img;
  img.data = Tensor<Real>::zeros({h, w, c});
  return img;
}

std::size_t ChangeMask::positive_count() const {
  std::size_t n = 0;
  for (auto v : data) n += v ? 1 : 0;
  return n;
}

ChangeMask make_mask(int h, int w) {
  ChangeMask m;
  m.h = h;
  m.w = w;
  m.data.assign(static_cast<std::size_t>(h) * w, 0);
  return m;
}

Tensor<Real> mask_to_tensor(const ChangeMask& m) {
  Tensor<Real> t = Tensor<Real>::zeros({m.h, m.w});
  for (Eigen::Index i = 0; i < t.data.size(); ++i)
    t.data[i] = m.data[static_cast<std::size_t>(i)] ? Real(1) : Real(0);
  return t;
}

void BitemporalSample::validate() const {
  pre.validate("sample " + id + " pre");
  post.validate("sample " + id + " post");
  if (pre.data.dims != post.data.dims)
    fail(ErrorKind::ShapeMismatch, "sample " + id + ": pre " +
                                       pre.data.shape_str() + " vs post " +
                                       post.data.shape_str());
  if (mask.h != pre.height() || mask.w != pre.width())
    fail(ErrorKind::ShapeMismatch, "sample " + id + ": mask dims differ");
  for (auto v : mask.data)
    if (v > 1) fail(ErrorKind::ShapeMismatch, "sample " + id + ": mask not binary");
}

ChannelStats compute_stats(const std::vector<ImagePlane>& images) {
  if (images.empty()) fail(ErrorKind::EmptyDataset, "compute_stats: no images");
  const int c = images[0].channels();
  std::vector<double> sum(c, 0.0), sumsq(c, 0.0);
  std::size_t n = 0;
  for (const auto& img : images) {
    if (img.channels() != c)
      fail(ErrorKind::ShapeMismatch, "compute_stats: mixed channel counts");
    const int hw = img.height() * img.width();
    for (int i = 0; i < hw; ++i)
      for (int ch = 0; ch < c; ++ch) {
        const double v = img.data.data[static_cast<Eigen::Index>(i) * c + ch];
        sum[ch] += v;
        sumsq[ch] += v * v;
      }
    n += static_cast<std::size_t>(hw);
  }
  ChannelStats st;
  st.mean.resize(c);
  st.std.resize(c);
  for (int ch = 0; ch < c; ++ch) {
    st.mean[ch] = sum[ch] / static_cast<double>(n);
    const double var = sumsq[ch] / static_cast<double>(n) -
                       st.mean[ch] * st.mean[ch];
    st.std[ch] = std::sqrt(var > 0 ? var : 0);
  }
  return st;
}

ImagePlane normalize(const ImagePlane& image, const ChannelStats& stats) {
  image.validate("normalize");
  const int c = image.channels();
  if (static_cast<int>(stats.mean.size()) != c ||
      static_cast<int>(stats.std.size()) != c)
    fail(ErrorKind::ShapeMismatch, "normalize: stats channel count");
  for (int ch = 0; ch < c; ++ch)
    if (!(stats.std[ch] > 0))
      fail(ErrorKind::ZeroStd,
           "normalize: std must be positive for channel " + std::to_string(ch));
  ImagePlane out = image;
  const int hw = image.height() * image.width();
  for (int i = 0; i < hw; ++i)
    for (int ch = 0; ch < c; ++ch) {
      auto& v = out.data.data[static_cast<Eigen::Index>(i) * c + ch];
      v = (v - stats.mean[ch]) / stats.std[ch];
    }
  return out;
}

ImagePlane compute_nbr(const ImagePlane& image, int nir_channel,
                       int swir_channel) {
  image.validate("compute_nbr");
  const int c = image.channels();
  if (nir_channel < 0 || nir_channel >= c || swir_channel < 0 ||
      swir_channel >= c)
    fail(ErrorKind::InvalidChannelIndex,
         "compute_nbr: channels " + std::to_string(nir_channel) + "," +
             std::to_string(swir_channel) + " out of range for " +
             std::to_string(c) + "-channel image");
  ImagePlane out = make_image(image.height(), image.width(), 1);
  out.channel_names = {"NBR"};
  const int hw = image.height() * image.width();
  for (int i = 0; i < hw; ++i) {
    const Real nir = image.data.data[static_cast<Eigen::Index>(i) * c + nir_channel];
    const Real swir = image.data.data[static_cast<Eigen::Index>(i) * c + swir_channel];
    const Real denom = nir + swir;
    out.data.data[i] = denom > 0 ? (nir - swir) / denom : Real(0);
  }
  return out;
}

}  // namespace latdiff
