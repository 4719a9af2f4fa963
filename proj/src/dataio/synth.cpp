#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "latdiff/core/rng.hpp"
#include "latdiff/dataio/dataset.hpp"
#include "latdiff/dataio/synth.hpp"

namespace latdiff {

namespace {

void check_config(const SynthConfig& c) {
  auto bad = [](const std::string& msg) {
    fail(ErrorKind::DegenerateConfig, "generate_synthetic: " + msg);
  };
  if (c.image_size < 1) bad("image_size must be >= 1");
  if (c.n_samples < 1) bad("n_samples must be >= 1");
  if (c.channels < 1) bad("channels must be >= 1");
  if (c.change_shape_count_range.lo < 0 ||
      c.change_shape_count_range.lo > c.change_shape_count_range.hi)
    bad("change_shape_count_range is not a valid interval");
  if (c.static_shape_count_range.lo < 0 ||
      c.static_shape_count_range.lo > c.static_shape_count_range.hi)
    bad("static_shape_count_range is not a valid interval");
  if (c.change_shape_size_range.lo < 1 ||
      c.change_shape_size_range.lo > c.change_shape_size_range.hi)
    bad("change_shape_size_range is not a valid interval");
  if (c.change_shape_size_range.hi > c.image_size)
    bad("change shapes larger than image");
  if (c.nuisance_brightness_range.lo > c.nuisance_brightness_range.hi)
    bad("nuisance_brightness_range is not a valid interval");
  if (c.nuisance_texture_level < 0) bad("nuisance_texture_level must be >= 0");
  if (c.change_amplitude_range.lo < 0 ||
      c.change_amplitude_range.lo > c.change_amplitude_range.hi)
    bad("change_amplitude_range is not a valid interval");
  const bool wants_shapes = c.change_shape_count_range.hi > 0 ||
                            c.static_shape_count_range.hi > 0;
  if (wants_shapes && c.shape_kinds.empty()) bad("shape_kinds is empty");
}

PlantedShape sample_shape(Rng& rng, const SynthConfig& cfg) {
  PlantedShape s;
  s.kind = cfg.shape_kinds[static_cast<std::size_t>(rng.uniform_int(
      0, static_cast<int>(cfg.shape_kinds.size()) - 1))];
  s.size = rng.uniform_int(cfg.change_shape_size_range.lo,
                           cfg.change_shape_size_range.hi);
  const int S = cfg.image_size;
  if (s.kind == ShapeKind::square) {
    s.y0 = rng.uniform_int(0, S - s.size);
    s.x0 = rng.uniform_int(0, S - s.size);
  } else {
    const double r = s.size / 2.0;
    s.cy = rng.uniform(r, S - r);
    s.cx = rng.uniform(r, S - r);
  }
  return s;
}

bool shape_covers(const PlantedShape& s, int y, int x) {
  if (s.kind == ShapeKind::square)
    return y >= s.y0 && y < s.y0 + s.size && x >= s.x0 && x < s.x0 + s.size;
  const double r = s.size / 2.0;
  const double dy = y + 0.5 - s.cy;
  const double dx = x + 0.5 - s.cx;
  return dy * dy + dx * dx <= r * r;
}

// Adds per-channel offsets inside the shape.
void stamp(ImagePlane& img, const PlantedShape& s,
           const std::vector<double>& delta) {
  const int S = img.height();
  const int c = img.channels();
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      if (!shape_covers(s, y, x)) continue;
      for (int ch = 0; ch < c; ++ch)
        img.data.at(y, x, ch) += static_cast<Real>(delta[ch]);
    }
}

}  // namespace

SynthResult generate_synthetic(const SynthConfig& config) {
  check_config(config);
  const int S = config.image_size;
  const int C = config.channels;
  SynthResult out;
  out.samples.reserve(config.n_samples);

  for (int i = 0; i < config.n_samples; ++i) {
    // One stream per sample: results do not depend on generation order.
    Rng rng = Rng::derived(config.seed, static_cast<std::uint64_t>(i));
    BitemporalSample sample;
    {
      std::ostringstream oss;
      oss << "s" << std::setw(4) << std::setfill('0') << i;
      sample.id = oss.str();
    }

    // Draw order is fixed: background waves, static shapes, change shapes,
    // brightness shift, texture noise.
    sample.pre = make_image(S, S, C);
    for (int ch = 0; ch < C; ++ch) {
      const double base = 0.35 + 0.3 * rng.uniform();
      struct Wave {
        double amp, fy, fx, phase;
      };
      Wave waves[3];
      for (auto& wv : waves)
        wv = {0.04 + 0.08 * rng.uniform(), rng.uniform(-3.0, 3.0),
              rng.uniform(-3.0, 3.0), rng.uniform(0.0, 2 * std::numbers::pi)};
      for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
          double v = base;
          for (const auto& wv : waves)
            v += wv.amp * std::sin(2 * std::numbers::pi *
                                       (wv.fy * y + wv.fx * x) / S +
                                   wv.phase);
          sample.pre.data.at(y, x, ch) = static_cast<Real>(v);
        }
    }

    // Static distractors land in both images so post-only shape cues cannot
    // solve the task.
    const int n_static = rng.uniform_int(config.static_shape_count_range.lo,
                                         config.static_shape_count_range.hi);
    for (int k = 0; k < n_static; ++k) {
      PlantedShape s = sample_shape(rng, config);
      std::vector<double> delta(C);
      for (auto& d : delta) d = rng.uniform(-0.3, 0.3);
      stamp(sample.pre, s, delta);
    }

    sample.post = sample.pre;
    sample.mask = make_mask(S, S);

    const int n_change = rng.uniform_int(config.change_shape_count_range.lo,
                                         config.change_shape_count_range.hi);
    std::vector<PlantedShape> shapes;
    for (int k = 0; k < n_change; ++k) {
      PlantedShape s = sample_shape(rng, config);
      std::vector<double> delta(C);
      for (auto& d : delta) {
        const double mag = rng.uniform(config.change_amplitude_range.lo,
                                       config.change_amplitude_range.hi);
        d = (rng.uniform() < 0.5 ? -1.0 : 1.0) * mag;
      }
      stamp(sample.post, s, delta);
      for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x)
          if (shape_covers(s, y, x)) sample.mask.at(y, x) = 1;
      shapes.push_back(s);
    }

    const double b = rng.uniform(config.nuisance_brightness_range.lo,
                                 config.nuisance_brightness_range.hi);
    sample.post.data.data += static_cast<Real>(b);

    if (config.nuisance_texture_level > 0) {
      for (Eigen::Index p = 0; p < sample.post.data.data.size(); ++p)
        sample.post.data.data[p] +=
            static_cast<Real>(config.nuisance_texture_level * rng.normal());
    }

    sample.validate();
    out.samples.push_back(std::move(sample));
    out.nuisance_labels.push_back(b);
    out.change_shapes.push_back(std::move(shapes));
  }
  return out;
}

void save_synthetic(const SynthResult& result, const std::string& root,
                    const std::string& provenance_json) {
  save_dataset(result.samples, root);
  std::map<std::string, double> labels;
  for (std::size_t i = 0; i < result.samples.size(); ++i)
    labels[result.samples[i].id] = result.nuisance_labels[i];
  save_nuisance_labels(labels, root);

  const int n = static_cast<int>(result.samples.size());
  const int n_train = n * 70 / 100;
  const int n_val = n * 15 / 100;
  std::map<std::string, std::vector<std::string>> splits;
  splits["train"];  // all three keys exist even when a split is empty
  splits["val"];
  splits["test"];
  for (int i = 0; i < n; ++i) {
    const std::string& id = result.samples[static_cast<std::size_t>(i)].id;
    if (i < n_train)
      splits["train"].push_back(id);
    else if (i < n_train + n_val)
      splits["val"].push_back(id);
    else
      splits["test"].push_back(id);
  }
  save_splits(splits, root);

  if (!provenance_json.empty()) {
    std::ofstream out(std::filesystem::path(root) / "provenance.json");
    if (!out) fail(ErrorKind::IoError, "cannot write provenance.json in " + root);
    out << provenance_json << '\n';
  }
}

}  // namespace latdiff
