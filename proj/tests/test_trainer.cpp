#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "latdiff/core/rng.hpp"
#include "latdiff/dataio/image.hpp"
#include "latdiff/de/de_module.hpp"
#include "latdiff/trainer/adam.hpp"
#include "latdiff/trainer/checkpoint.hpp"
#include "latdiff/trainer/train.hpp"
#include "test_util.hpp"

using namespace latdiff;
namespace fs = std::filesystem;

namespace {

DEArchConfig tiny_de_arch() {
  DEArchConfig a;
  a.in_channels = 1;
  a.c_z = 2;
  a.base_width = 2;
  a.image_size = 8;
  return a;
}

BackboneArchConfig tiny_bb_arch() {
  BackboneArchConfig a;
  a.in_channels = 1;
  a.base_width = 2;
  a.depth = 1;
  a.input_mode = InputMode::full_concat;
  return a;
}

std::vector<BitemporalSample> tiny_dataset(int n, std::uint64_t seed) {
  std::vector<BitemporalSample> out;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    BitemporalSample s;
    s.id = "s" + std::to_string(i);
    s.pre = make_image(8, 8, 1);
    s.post = make_image(8, 8, 1);
    for (Eigen::Index p = 0; p < s.pre.data.size(); ++p) {
      s.pre.data.data[p] = rng.uniform(-1.0, 1.0);
      s.post.data.data[p] = rng.uniform(-1.0, 1.0);
    }
    s.mask = make_mask(8, 8);
    for (auto& v : s.mask.data) v = rng.uniform() < 0.25 ? 1 : 0;
    out.push_back(std::move(s));
  }
  return out;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 2;
  c.learning_rate = 1e-3;
  c.seed = 7;
  return c;
}

bool params_equal(const ParamSet& a, const ParamSet& b) {
  if (a.items.size() != b.items.size()) return false;
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    if (a.items[i].first != b.items[i].first) return false;
    if (a.items[i].second.dims != b.items[i].second.dims) return false;
    if ((a.items[i].second.data != b.items[i].second.data).any()) return false;
  }
  return true;
}

bool de_equal(const DEParams& a, const DEParams& b) {
  return params_equal(a.encoder_params, b.encoder_params) &&
         params_equal(a.decoder_params, b.decoder_params) &&
         params_equal(a.adversary_params, b.adversary_params);
}

fs::path temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() /
               (std::string("latdiff_trainer_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("validate_config rejects each degenerate field") {
  TrainConfig ok = quick_config();
  validate_config(ok);

  auto expect_reject = [](TrainConfig c) {
    CHECK_THROWS_AS(validate_config(c), Error);
  };
  TrainConfig c = ok;
  c.learning_rate = 0.0;
  expect_reject(c);
  c = ok;
  c.epochs = 0;
  expect_reject(c);
  c = ok;
  c.batch_size = 0;
  expect_reject(c);
  c = ok;
  c.de_update_period_k = 0;
  expect_reject(c);
  c = ok;
  c.adversary_steps_per_main_step = -1;
  expect_reject(c);
  c = ok;
  c.beta = -0.1;
  expect_reject(c);
  c = ok;
  c.beta = std::nan("");
  expect_reject(c);
  c = ok;
  c.lambda = -1.0;
  expect_reject(c);
  c = ok;
  c.optimizer = "sgd";
  expect_reject(c);
}

TEST_CASE("adam: two bias-corrected steps match hand arithmetic") {
  ParamSet p;
  p.add("w", Tensor<Real>::full({2}, 1.0));
  p.at("w").data[1] = -2.0;
  AdamState st = AdamState::like(p);
  AdamConfig cfg;
  cfg.lr = 0.1;

  ParamSet g1 = p.zeros_like();
  g1.at("w").data[0] = 0.5;
  g1.at("w").data[1] = -3.0;
  ParamSet g2 = p.zeros_like();
  g2.at("w").data[0] = -0.25;
  g2.at("w").data[1] = 1.0;

  // Independent replay of the update rule.
  double w[2] = {1.0, -2.0};
  double m[2] = {0, 0}, v[2] = {0, 0};
  const double grads[2][2] = {{0.5, -3.0}, {-0.25, 1.0}};
  for (int t = 1; t <= 2; ++t) {
    const double bc1 = 1.0 - std::pow(0.9, t);
    const double bc2 = 1.0 - std::pow(0.999, t);
    for (int i = 0; i < 2; ++i) {
      const double gi = grads[t - 1][i];
      m[i] = 0.9 * m[i] + 0.1 * gi;
      v[i] = 0.999 * v[i] + 0.001 * gi * gi;
      w[i] -= 0.1 * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + 1e-8);
    }
  }

  adam_step(p, g1, st, cfg);
  adam_step(p, g2, st, cfg);
  CHECK(testutil::rel_err(p.at("w").data[0], w[0]) < 1e-14);
  CHECK(testutil::rel_err(p.at("w").data[1], w[1]) < 1e-14);
  CHECK(st.t == 2);

  // Mismatched gradient names are rejected.
  ParamSet bad;
  bad.add("q", Tensor<Real>::zeros({2}));
  CHECK_THROWS_AS(adam_step(p, bad, st, cfg), Error);
}

TEST_CASE("pretrain: schedule runs adversary steps then one main step") {
  const DEArchConfig arch = tiny_de_arch();
  auto data = tiny_dataset(4, 1);
  TrainConfig cfg = quick_config();
  cfg.adversary_steps_per_main_step = 2;

  std::vector<std::string> phases;
  TrainHooks hooks;
  hooks.on_de_substep = [&](const char* phase, const DEParams&) {
    phases.push_back(phase);
  };
  pretrain_de(data, arch, cfg, &hooks);

  // 4 samples, batch 2 -> 2 batches; each contributes (adv, adv, main).
  REQUIRE(phases.size() == 6);
  const std::vector<std::string> expect = {"adversary_step", "adversary_step",
                                           "main_step",      "adversary_step",
                                           "adversary_step", "main_step"};
  CHECK(phases == expect);
}

TEST_CASE("pretrain: parameter partitions never cross-contaminate") {
  const DEArchConfig arch = tiny_de_arch();
  auto data = tiny_dataset(4, 2);
  TrainConfig cfg = quick_config();
  cfg.epochs = 2;
  cfg.adversary_steps_per_main_step = 1;

  DEParams init = init_de(arch, cfg.seed);
  ParamSet last_enc = init.encoder_params;
  ParamSet last_dec = init.decoder_params;
  ParamSet last_adv = init.adversary_params;
  bool violated = false;
  int adv_changes = 0, main_changes = 0;

  TrainHooks hooks;
  hooks.on_de_substep = [&](const char* phase, const DEParams& de) {
    if (std::string(phase) == "adversary_step") {
      // Only the adversary may have moved.
      if (!params_equal(de.encoder_params, last_enc)) violated = true;
      if (!params_equal(de.decoder_params, last_dec)) violated = true;
      if (!params_equal(de.adversary_params, last_adv)) ++adv_changes;
    } else {
      // Only encoder/decoder may have moved.
      if (!params_equal(de.adversary_params, last_adv)) violated = true;
      if (!params_equal(de.encoder_params, last_enc)) ++main_changes;
    }
    last_enc = de.encoder_params;
    last_dec = de.decoder_params;
    last_adv = de.adversary_params;
  };
  pretrain_de(data, arch, cfg, &hooks);
  CHECK_FALSE(violated);
  CHECK(adv_changes == 4);   // every adversary step moved it
  CHECK(main_changes == 4);  // every main step moved the encoder
}

TEST_CASE("pretrain: identical (seed, config, data) reproduces the history") {
  const DEArchConfig arch = tiny_de_arch();
  auto data = tiny_dataset(4, 3);
  TrainConfig cfg = quick_config();
  cfg.epochs = 2;

  auto [de1, h1] = pretrain_de(data, arch, cfg);
  auto [de2, h2] = pretrain_de(data, arch, cfg);
  REQUIRE(h1.epochs.size() == h2.epochs.size());
  for (std::size_t e = 0; e < h1.epochs.size(); ++e) {
    CHECK(h1.epochs[e].reconstruction_loss == h2.epochs[e].reconstruction_loss);
    CHECK(h1.epochs[e].adversary_loss == h2.epochs[e].adversary_loss);
    CHECK(h1.epochs[e].de_loss == h2.epochs[e].de_loss);
  }
  CHECK(de_equal(de1, de2));
  // And a different seed genuinely changes the trajectory.
  TrainConfig other = cfg;
  other.seed = cfg.seed + 1;
  auto [de3, h3] = pretrain_de(data, arch, other);
  CHECK(h3.epochs[0].de_loss != h1.epochs[0].de_loss);
}

TEST_CASE("pretrain: losses are recorded and the objective identity holds") {
  const DEArchConfig arch = tiny_de_arch();
  auto data = tiny_dataset(4, 4);
  TrainConfig cfg = quick_config();
  cfg.epochs = 3;
  cfg.beta = 0.8;
  auto [de, hist] = pretrain_de(data, arch, cfg);
  REQUIRE(hist.epochs.size() == 3);
  for (const auto& e : hist.epochs) {
    CHECK(std::isfinite(e.reconstruction_loss));
    CHECK(std::isfinite(e.adversary_loss));
    CHECK(testutil::rel_err(e.de_loss,
                            e.reconstruction_loss - 0.8 * e.adversary_loss) <
          1e-12);
  }
}

TEST_CASE("pretrain: degenerate inputs are rejected") {
  const DEArchConfig arch = tiny_de_arch();
  TrainConfig cfg = quick_config();
  CHECK_THROWS_AS(pretrain_de({}, arch, cfg), Error);

  // Wrong image size vs arch names the offending sample.
  auto data = tiny_dataset(2, 5);
  DEArchConfig big = arch;
  big.image_size = 16;
  CHECK_THROWS_WITH_AS(pretrain_de(data, big, cfg), doctest::Contains("s0"),
                       Error);

  // A non-finite pixel surfaces as a non-finite loss, not a crash.
  auto bad = tiny_dataset(2, 6);
  bad[1].post.data.data[3] = std::numeric_limits<Real>::infinity();
  try {
    pretrain_de(bad, arch, cfg);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteLoss);
  }
}

TEST_CASE("train_segmenter: baseline has no DE and records history") {
  auto train = tiny_dataset(4, 10);
  auto val = tiny_dataset(2, 11);
  TrainConfig cfg = quick_config();
  cfg.epochs = 2;
  SegTrainResult r = train_segmenter(train, val, BackboneKind::unet,
                                     tiny_bb_arch(), std::nullopt, cfg);
  CHECK_FALSE(r.de.has_value());
  CHECK(r.backbone.arch.z_channels == 0);
  REQUIRE(r.history.epochs.size() == 2);
  for (const auto& e : r.history.epochs) {
    CHECK(std::isfinite(e.segmentation_loss));
    CHECK(e.total_loss == e.segmentation_loss);  // lambda inactive without DE
    REQUIRE(e.val_iou.has_value());
    REQUIRE(e.val_f1.has_value());
    CHECK(*e.val_iou >= 0.0);
    CHECK(*e.val_iou <= 1.0);
  }
  // Without a validation set the metrics stay absent.
  SegTrainResult r2 = train_segmenter(train, {}, BackboneKind::unet,
                                      tiny_bb_arch(), std::nullopt, cfg);
  CHECK_FALSE(r2.history.epochs[0].val_iou.has_value());
  CHECK_THROWS_AS(train_segmenter({}, val, BackboneKind::unet, tiny_bb_arch(),
                                  std::nullopt, cfg),
                  Error);
}

TEST_CASE("train_segmenter: frozen DE comes back bit-identical") {
  const DEArchConfig de_arch = tiny_de_arch();
  auto train = tiny_dataset(4, 12);
  TrainConfig cfg = quick_config();
  cfg.epochs = 2;
  cfg.de_mode = DEMode::frozen;
  DEParams de = init_de(de_arch, 99);
  SegTrainResult r = train_segmenter(train, {}, BackboneKind::unet,
                                     tiny_bb_arch(), de, cfg);
  REQUIRE(r.de.has_value());
  CHECK(de_equal(*r.de, de));
  CHECK(r.backbone.arch.z_channels == de_arch.c_z);
}

TEST_CASE("train_segmenter: finetune needs a DE") {
  auto train = tiny_dataset(2, 13);
  TrainConfig cfg = quick_config();
  cfg.de_mode = DEMode::finetune;
  try {
    train_segmenter(train, {}, BackboneKind::unet, tiny_bb_arch(),
                    std::nullopt, cfg);
    FAIL("expected MissingDE");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingDE);
  }
}

TEST_CASE("train_segmenter: finetune runs exactly floor(N/k) DE cycles") {
  const DEArchConfig de_arch = tiny_de_arch();
  auto train = tiny_dataset(20, 14);
  TrainConfig cfg = quick_config();
  cfg.epochs = 5;
  cfg.batch_size = 1;  // 20 batches/epoch -> 100 main steps
  cfg.de_update_period_k = 5;
  cfg.de_mode = DEMode::finetune;
  DEParams de = init_de(de_arch, 3);

  std::vector<int> cycle_steps;
  TrainHooks hooks;
  hooks.on_de_cycle = [&](int step) { cycle_steps.push_back(step); };
  SegTrainResult r = train_segmenter(train, {}, BackboneKind::unet,
                                     tiny_bb_arch(), de, cfg, &hooks);
  REQUIRE(cycle_steps.size() == 20);
  for (std::size_t i = 0; i < cycle_steps.size(); ++i)
    CHECK(cycle_steps[i] == static_cast<int>(5 * (i + 1)));
  // Fine-tuning moved the DE away from its pretrained state.
  REQUIRE(r.de.has_value());
  CHECK_FALSE(de_equal(*r.de, de));
}

TEST_CASE("train_segmenter: finetune partitions stay separate per phase") {
  const DEArchConfig de_arch = tiny_de_arch();
  auto train = tiny_dataset(6, 15);
  TrainConfig cfg = quick_config();
  cfg.epochs = 2;
  cfg.batch_size = 2;
  cfg.de_update_period_k = 1;
  cfg.de_mode = DEMode::finetune;
  cfg.adversary_steps_per_main_step = 1;
  DEParams de = init_de(de_arch, 4);

  ParamSet last_enc = de.encoder_params;
  ParamSet last_dec = de.decoder_params;
  ParamSet last_adv = de.adversary_params;
  bool violated = false;
  TrainHooks hooks;
  hooks.on_de_substep = [&](const char* phase, const DEParams& d) {
    if (std::string(phase) == "de_cycle_adversary") {
      if (!params_equal(d.encoder_params, last_enc)) violated = true;
      if (!params_equal(d.decoder_params, last_dec)) violated = true;
    } else {
      if (!params_equal(d.adversary_params, last_adv)) violated = true;
    }
    last_enc = d.encoder_params;
    last_dec = d.decoder_params;
    last_adv = d.adversary_params;
  };
  train_segmenter(train, {}, BackboneKind::unet, tiny_bb_arch(), de, cfg,
                  &hooks);
  CHECK_FALSE(violated);

  // With zero adversary steps per cycle the adversary never moves at all.
  TrainConfig cfg0 = cfg;
  cfg0.adversary_steps_per_main_step = 0;
  SegTrainResult r0 = train_segmenter(train, {}, BackboneKind::unet,
                                      tiny_bb_arch(), de, cfg0);
  REQUIRE(r0.de.has_value());
  CHECK(params_equal(r0.de->adversary_params, de.adversary_params));
  CHECK_FALSE(params_equal(r0.de->encoder_params, de.encoder_params));
}

TEST_CASE("train_segmenter: identical runs reproduce the loss trajectory") {
  auto train = tiny_dataset(4, 16);
  auto val = tiny_dataset(2, 17);
  TrainConfig cfg = quick_config();
  cfg.epochs = 3;
  DEParams de = init_de(tiny_de_arch(), 5);
  for (BackboneKind kind : {BackboneKind::unet, BackboneKind::bit}) {
    SegTrainResult a = train_segmenter(train, val, kind, tiny_bb_arch(), de,
                                       cfg);
    SegTrainResult b = train_segmenter(train, val, kind, tiny_bb_arch(), de,
                                       cfg);
    REQUIRE(a.history.epochs.size() == b.history.epochs.size());
    for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
      CHECK(std::fabs(a.history.epochs[e].segmentation_loss -
                      b.history.epochs[e].segmentation_loss) <= 1e-7);
      CHECK(std::fabs(a.history.epochs[e].total_loss -
                      b.history.epochs[e].total_loss) <= 1e-7);
    }
    CHECK(params_equal(a.backbone.params, b.backbone.params));
  }
}

TEST_CASE("checkpoint: DE round-trip is bit-exact with metadata intact") {
  const DEArchConfig arch = tiny_de_arch();
  DEParams de = init_de(arch, 21);
  TrainConfig cfg = quick_config();
  cfg.beta = 0.77;
  cfg.lambda = 0.31;
  cfg.de_mode = DEMode::finetune;
  const fs::path dir = temp_dir("ckpt");
  const std::string path = (dir / "de.ckpt").string();

  Checkpoint c = make_de_checkpoint(de, cfg, R"({"note":"unit"})");
  save_checkpoint(c, path);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.format_version == kCheckpointVersion);

  DEParams de2 = de_from_checkpoint(back);
  CHECK(de_equal(de, de2));
  CHECK(de2.arch.in_channels == arch.in_channels);
  CHECK(de2.arch.c_z == arch.c_z);
  CHECK(de2.arch.base_width == arch.base_width);
  CHECK(de2.arch.image_size == arch.image_size);

  TrainConfig cfg2 = train_config_from_checkpoint(back);
  CHECK(cfg2.beta == cfg.beta);
  CHECK(cfg2.lambda == cfg.lambda);
  CHECK(cfg2.de_mode == DEMode::finetune);
  CHECK(cfg2.seed == cfg.seed);
}

TEST_CASE("checkpoint: segmentation round-trip with and without a DE") {
  const fs::path dir = temp_dir("segckpt");
  BackboneParams bb = init_backbone(BackboneKind::bit, tiny_bb_arch(), 31);
  TrainConfig cfg = quick_config();

  const std::string p1 = (dir / "baseline.ckpt").string();
  save_checkpoint(make_seg_checkpoint(bb, std::nullopt, cfg, ""), p1);
  Checkpoint c1 = load_checkpoint(p1);
  BackboneParams bb1 = backbone_from_checkpoint(c1);
  CHECK(bb1.kind == BackboneKind::bit);
  CHECK(params_equal(bb1.params, bb.params));
  CHECK_FALSE(de_from_seg_checkpoint(c1).has_value());
  // A baseline checkpoint cannot stand in for a DE checkpoint.
  CHECK_THROWS_AS(de_from_checkpoint(c1), Error);

  DEParams de = init_de(tiny_de_arch(), 32);
  const std::string p2 = (dir / "guided.ckpt").string();
  save_checkpoint(make_seg_checkpoint(bb, de, cfg, ""), p2);
  Checkpoint c2 = load_checkpoint(p2);
  auto de2 = de_from_seg_checkpoint(c2);
  REQUIRE(de2.has_value());
  CHECK(de_equal(*de2, de));
}

TEST_CASE("checkpoint: damage and version skew are detected in order") {
  const fs::path dir = temp_dir("ckpt_damage");
  DEParams de = init_de(tiny_de_arch(), 41);
  const std::string path = (dir / "x.ckpt").string();
  save_checkpoint(make_de_checkpoint(de, quick_config(), ""), path);

  auto read_all = [&]() {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  auto write_all = [&](const std::string& bytes, const std::string& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };
  const std::string original = read_all();

  // Flipped payload byte -> checksum failure.
  std::string corrupt = original;
  corrupt[corrupt.size() / 2] ^= 0x40;
  const std::string pc = (dir / "corrupt.ckpt").string();
  write_all(corrupt, pc);
  try {
    load_checkpoint(pc);
    FAIL("expected CorruptChecksum");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CorruptChecksum);
  }

  // Version bump is reported as a version problem, not as damage.
  std::string skewed = original;
  skewed[4] = 99;
  const std::string pv = (dir / "version.ckpt").string();
  write_all(skewed, pv);
  try {
    load_checkpoint(pv);
    FAIL("expected VersionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::VersionMismatch);
  }

  // Wrong magic and missing file.
  std::string not_ckpt = original;
  not_ckpt[0] = 'X';
  const std::string pm = (dir / "magic.ckpt").string();
  write_all(not_ckpt, pm);
  CHECK_THROWS_AS(load_checkpoint(pm), Error);
  try {
    load_checkpoint((dir / "absent.ckpt").string());
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IoError);
  }

  // Truncation loses the trailing checksum.
  const std::string pt = (dir / "trunc.ckpt").string();
  write_all(original.substr(0, original.size() - 9), pt);
  CHECK_THROWS_AS(load_checkpoint(pt), Error);
}

TEST_CASE("checkpoint: training resumes identically from restored params") {
  // Saving and loading must not perturb a single bit of the model: encoding
  // a sample with the restored DE matches the original exactly.
  const DEArchConfig arch = tiny_de_arch();
  auto data = tiny_dataset(2, 55);
  TrainConfig cfg = quick_config();
  auto [de, hist] = pretrain_de(data, arch, cfg);

  const fs::path dir = temp_dir("resume");
  const std::string path = (dir / "de.ckpt").string();
  save_checkpoint(make_de_checkpoint(de, cfg, ""), path);
  DEParams back = de_from_checkpoint(load_checkpoint(path));

  LatentDifference z1 = encode(de, data[0].pre, data[0].post);
  LatentDifference z2 = encode(back, data[0].pre, data[0].post);
  CHECK((z1.data.data == z2.data.data).all());
}
