#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "latdiff/backbones/backbone.hpp"
#include "latdiff/core/params.hpp"
#include "latdiff/de/de_module.hpp"
#include "latdiff/trainer/train.hpp"

namespace latdiff {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Container: magic "LDGK", u32 LE format version, u64 LE metadata length +
// JSON metadata text, u32 LE tensor count, per tensor (u32 name length,
// name bytes, u32 ndims, i32 dims..., little-endian scalar payload), then a
// trailing CRC32 (zlib polynomial) of every byte before it. The metadata's
// "dtype" key records the payload width; this writer emits f64 so round-trips
// are bit-exact, and the reader accepts f32 as well.
struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  std::string meta_json;  // arch, train config, provenance, rng state
  ParamSet tensors;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Model payload helpers. DE tensors carry de.enc/de.dec/de.adv prefixes,
// backbone tensors the bb prefix; metadata records the arch configs, the
// training config, and caller-supplied provenance JSON.
Checkpoint make_de_checkpoint(const DEParams& de, const TrainConfig& config,
                              const std::string& provenance_json);
DEParams de_from_checkpoint(const Checkpoint& c);

Checkpoint make_seg_checkpoint(const BackboneParams& backbone,
                               const std::optional<DEParams>& de,
                               const TrainConfig& config,
                               const std::string& provenance_json);
BackboneParams backbone_from_checkpoint(const Checkpoint& c);
std::optional<DEParams> de_from_seg_checkpoint(const Checkpoint& c);
TrainConfig train_config_from_checkpoint(const Checkpoint& c);

}  // namespace latdiff
