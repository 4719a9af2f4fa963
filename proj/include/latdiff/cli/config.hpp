#pragma once

#include <map>
#include <string>

#include "latdiff/backbones/backbone.hpp"
#include "latdiff/dataio/synth.hpp"
#include "latdiff/trainer/train.hpp"

namespace latdiff {

// Everything a pipeline run needs, with built-in defaults. Resolution order:
// command-line flags > config file > defaults.
struct ResolvedConfig {
  TrainConfig train;
  DEArchConfig de_arch;
  BackboneArchConfig backbone_arch;
  SynthConfig synth;

  std::string to_json() const;  // full echo, embedded in artifacts
};

// Config file grammar: flat `key = value` lines plus [train], [de],
// [backbone], [synth] sections; '#' comments; unsectioned keys belong to
// train. Unknown keys raise UnknownKey naming the key; malformed lines raise
// ParseError with the line number.
void apply_config_text(ResolvedConfig& cfg, const std::string& text);
void apply_config_file(ResolvedConfig& cfg, const std::string& path);

// Flag overrides as section-qualified keys ("train.beta", "de.c_z", ...).
void apply_overrides(ResolvedConfig& cfg,
                     const std::map<std::string, std::string>& overrides);

// defaults -> file (optional) -> overrides.
ResolvedConfig resolve_config(const std::string& config_path,
                              const std::map<std::string, std::string>& overrides);

}  // namespace latdiff
