#include <fstream>
#include <sstream>

#include "common/json_codec.hpp"
#include "latdiff/cli/config.hpp"
#include "latdiff/core/error.hpp"

namespace latdiff {

using nlohmann::json;

std::string ResolvedConfig::to_json() const {
  json j;
  j["train"] = codec::to_json(train);
  j["de"] = codec::to_json(de_arch);
  j["backbone"] = codec::to_json(backbone_arch);
  j["synth"] = codec::to_json(synth);
  return j.dump(2);
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& where) {
  fail(ErrorKind::ParseError,
       "bad value for " + key + " (" + where + "): '" + value + "'");
}

double to_double(const std::string& key, const std::string& value,
                 const std::string& where) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(value, &pos);
    if (pos != value.size()) bad_value(key, value, where);
    return d;
  } catch (const Error&) {
    throw;
  } catch (...) {
    bad_value(key, value, where);
  }
}

int to_int(const std::string& key, const std::string& value,
           const std::string& where) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) bad_value(key, value, where);
    return static_cast<int>(v);
  } catch (const Error&) {
    throw;
  } catch (...) {
    bad_value(key, value, where);
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value,
                     const std::string& where) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(value, &pos);
    if (pos != value.size()) bad_value(key, value, where);
    return v;
  } catch (const Error&) {
    throw;
  } catch (...) {
    bad_value(key, value, where);
  }
}

// "lo,hi" pairs for the synth ranges.
std::pair<std::string, std::string> split_pair(const std::string& key,
                                               const std::string& value,
                                               const std::string& where) {
  const auto c = value.find(',');
  if (c == std::string::npos) bad_value(key, value, where);
  return {trim(value.substr(0, c)), trim(value.substr(c + 1))};
}

IntRange to_int_range(const std::string& key, const std::string& value,
                      const std::string& where) {
  const auto [lo, hi] = split_pair(key, value, where);
  return {to_int(key, lo, where), to_int(key, hi, where)};
}

RealRange to_real_range(const std::string& key, const std::string& value,
                        const std::string& where) {
  const auto [lo, hi] = split_pair(key, value, where);
  return {to_double(key, lo, where), to_double(key, hi, where)};
}

void set_train(TrainConfig& c, const std::string& key,
               const std::string& value, const std::string& where) {
  if (key == "beta")
    c.beta = to_double(key, value, where);
  else if (key == "lambda")
    c.lambda = to_double(key, value, where);
  else if (key == "learning_rate")
    c.learning_rate = to_double(key, value, where);
  else if (key == "epochs")
    c.epochs = to_int(key, value, where);
  else if (key == "batch_size")
    c.batch_size = to_int(key, value, where);
  else if (key == "de_update_period_k" || key == "k")
    c.de_update_period_k = to_int(key, value, where);
  else if (key == "de_mode")
    c.de_mode = codec::de_mode_from(value);
  else if (key == "adversary_steps_per_main_step")
    c.adversary_steps_per_main_step = to_int(key, value, where);
  else if (key == "seed")
    c.seed = to_u64(key, value, where);
  else if (key == "optimizer")
    c.optimizer = value;
  else
    fail(ErrorKind::UnknownKey, "unknown train key: " + key + " (" + where + ")");
}

void set_de(DEArchConfig& a, const std::string& key, const std::string& value,
            const std::string& where) {
  if (key == "in_channels")
    a.in_channels = to_int(key, value, where);
  else if (key == "c_z")
    a.c_z = to_int(key, value, where);
  else if (key == "base_width")
    a.base_width = to_int(key, value, where);
  else if (key == "image_size")
    a.image_size = to_int(key, value, where);
  else
    fail(ErrorKind::UnknownKey, "unknown de key: " + key + " (" + where + ")");
}

void set_backbone(BackboneArchConfig& a, const std::string& key,
                  const std::string& value, const std::string& where) {
  if (key == "in_channels")
    a.in_channels = to_int(key, value, where);
  else if (key == "base_width")
    a.base_width = to_int(key, value, where);
  else if (key == "depth")
    a.depth = to_int(key, value, where);
  else if (key == "token_count")
    a.token_count = to_int(key, value, where);
  else if (key == "transformer_dim")
    a.transformer_dim = to_int(key, value, where);
  else if (key == "transformer_layers")
    a.transformer_layers = to_int(key, value, where);
  else if (key == "input_mode")
    a.input_mode = codec::input_mode_from(value);
  else if (key == "z_channels")
    a.z_channels = to_int(key, value, where);
  else
    fail(ErrorKind::UnknownKey,
         "unknown backbone key: " + key + " (" + where + ")");
}

void set_synth(SynthConfig& c, const std::string& key,
               const std::string& value, const std::string& where) {
  if (key == "image_size")
    c.image_size = to_int(key, value, where);
  else if (key == "n_samples")
    c.n_samples = to_int(key, value, where);
  else if (key == "channels")
    c.channels = to_int(key, value, where);
  else if (key == "change_shape_count")
    c.change_shape_count_range = to_int_range(key, value, where);
  else if (key == "change_shape_size")
    c.change_shape_size_range = to_int_range(key, value, where);
  else if (key == "static_shape_count")
    c.static_shape_count_range = to_int_range(key, value, where);
  else if (key == "nuisance_brightness")
    c.nuisance_brightness_range = to_real_range(key, value, where);
  else if (key == "nuisance_texture_level")
    c.nuisance_texture_level = to_double(key, value, where);
  else if (key == "change_amplitude")
    c.change_amplitude_range = to_real_range(key, value, where);
  else if (key == "seed")
    c.seed = to_u64(key, value, where);
  else
    fail(ErrorKind::UnknownKey, "unknown synth key: " + key + " (" + where + ")");
}

void set_key(ResolvedConfig& cfg, const std::string& section,
             const std::string& key, const std::string& value,
             const std::string& where) {
  if (section == "train")
    set_train(cfg.train, key, value, where);
  else if (section == "de")
    set_de(cfg.de_arch, key, value, where);
  else if (section == "backbone")
    set_backbone(cfg.backbone_arch, key, value, where);
  else if (section == "synth")
    set_synth(cfg.synth, key, value, where);
  else
    fail(ErrorKind::UnknownKey, "unknown section: " + section + " (" + where + ")");
}

}  // namespace

void apply_config_text(ResolvedConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::string section = "train";  // unsectioned keys belong to train
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']')
        fail(ErrorKind::ParseError, "unterminated section header (" + where + ")");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        fail(ErrorKind::ParseError, "empty section header (" + where + ")");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::ParseError, "expected key = value (" + where + ")");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      fail(ErrorKind::ParseError, "empty key (" + where + ")");
    set_key(cfg, section, key, value, where);
  }
}

void apply_config_file(ResolvedConfig& cfg, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  apply_config_text(cfg, ss.str());
}

void apply_overrides(ResolvedConfig& cfg,
                     const std::map<std::string, std::string>& overrides) {
  for (const auto& [qualified, value] : overrides) {
    const auto dot = qualified.find('.');
    if (dot == std::string::npos)
      fail(ErrorKind::UnknownKey,
           "override key must be section-qualified: " + qualified);
    set_key(cfg, qualified.substr(0, dot), qualified.substr(dot + 1), value,
            "override");
  }
}

ResolvedConfig resolve_config(
    const std::string& config_path,
    const std::map<std::string, std::string>& overrides) {
  ResolvedConfig cfg;
  if (!config_path.empty()) apply_config_file(cfg, config_path);
  apply_overrides(cfg, overrides);
  return cfg;
}

}  // namespace latdiff
