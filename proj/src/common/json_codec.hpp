#pragma once

// Internal JSON codecs for config structs, shared by checkpointing, the CLI,
// and report writers. Not installed.

#include <string>

#include "json.hpp"
#include "latdiff/backbones/backbone.hpp"
#include "latdiff/dataio/synth.hpp"
#include "latdiff/trainer/train.hpp"

namespace latdiff::codec {

inline const char* de_mode_name(DEMode m) {
  return m == DEMode::frozen ? "frozen" : "finetune";
}
inline DEMode de_mode_from(const std::string& s) {
  if (s == "frozen") return DEMode::frozen;
  if (s == "finetune") return DEMode::finetune;
  fail(ErrorKind::ParseError, "unknown de_mode: " + s);
}

inline const char* input_mode_name(InputMode m) {
  return m == InputMode::post_only ? "post_only" : "full_concat";
}
inline InputMode input_mode_from(const std::string& s) {
  if (s == "post_only") return InputMode::post_only;
  if (s == "full_concat") return InputMode::full_concat;
  fail(ErrorKind::ParseError, "unknown input_mode: " + s);
}

inline const char* backbone_kind_name(BackboneKind k) {
  return k == BackboneKind::unet ? "unet" : "bit";
}
inline BackboneKind backbone_kind_from(const std::string& s) {
  if (s == "unet") return BackboneKind::unet;
  if (s == "bit") return BackboneKind::bit;
  fail(ErrorKind::ParseError, "unknown backbone kind: " + s);
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"beta", c.beta},
          {"lambda", c.lambda},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"de_update_period_k", c.de_update_period_k},
          {"de_mode", de_mode_name(c.de_mode)},
          {"adversary_steps_per_main_step", c.adversary_steps_per_main_step},
          {"seed", c.seed},
          {"optimizer", c.optimizer}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.beta = j.value("beta", c.beta);
  c.lambda = j.value("lambda", c.lambda);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.de_update_period_k = j.value("de_update_period_k", c.de_update_period_k);
  if (j.contains("de_mode"))
    c.de_mode = de_mode_from(j["de_mode"].get<std::string>());
  c.adversary_steps_per_main_step =
      j.value("adversary_steps_per_main_step", c.adversary_steps_per_main_step);
  c.seed = j.value("seed", c.seed);
  c.optimizer = j.value("optimizer", c.optimizer);
  return c;
}

inline nlohmann::json to_json(const DEArchConfig& a) {
  return {{"in_channels", a.in_channels},
          {"c_z", a.c_z},
          {"base_width", a.base_width},
          {"image_size", a.image_size}};
}

inline DEArchConfig de_arch_from_json(const nlohmann::json& j) {
  DEArchConfig a;
  a.in_channels = j.value("in_channels", a.in_channels);
  a.c_z = j.value("c_z", a.c_z);
  a.base_width = j.value("base_width", a.base_width);
  a.image_size = j.value("image_size", a.image_size);
  return a;
}

inline nlohmann::json to_json(const BackboneArchConfig& a) {
  return {{"in_channels", a.in_channels},
          {"base_width", a.base_width},
          {"depth", a.depth},
          {"token_count", a.token_count},
          {"transformer_dim", a.transformer_dim},
          {"transformer_layers", a.transformer_layers},
          {"input_mode", input_mode_name(a.input_mode)},
          {"z_channels", a.z_channels}};
}

inline BackboneArchConfig backbone_arch_from_json(const nlohmann::json& j) {
  BackboneArchConfig a;
  a.in_channels = j.value("in_channels", a.in_channels);
  a.base_width = j.value("base_width", a.base_width);
  a.depth = j.value("depth", a.depth);
  a.token_count = j.value("token_count", a.token_count);
  a.transformer_dim = j.value("transformer_dim", a.transformer_dim);
  a.transformer_layers = j.value("transformer_layers", a.transformer_layers);
  if (j.contains("input_mode"))
    a.input_mode = input_mode_from(j["input_mode"].get<std::string>());
  a.z_channels = j.value("z_channels", a.z_channels);
  return a;
}

inline nlohmann::json to_json(const SynthConfig& c) {
  return {{"image_size", c.image_size},
          {"n_samples", c.n_samples},
          {"channels", c.channels},
          {"change_shape_count", {c.change_shape_count_range.lo,
                                  c.change_shape_count_range.hi}},
          {"change_shape_size", {c.change_shape_size_range.lo,
                                 c.change_shape_size_range.hi}},
          {"static_shape_count", {c.static_shape_count_range.lo,
                                  c.static_shape_count_range.hi}},
          {"nuisance_brightness", {c.nuisance_brightness_range.lo,
                                   c.nuisance_brightness_range.hi}},
          {"nuisance_texture_level", c.nuisance_texture_level},
          {"change_amplitude", {c.change_amplitude_range.lo,
                                c.change_amplitude_range.hi}},
          {"seed", c.seed}};
}

}  // namespace latdiff::codec
