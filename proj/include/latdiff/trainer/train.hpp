#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "latdiff/backbones/backbone.hpp"
#include "latdiff/de/de_module.hpp"

namespace latdiff {

enum class DEMode { frozen, finetune };

struct TrainConfig {
  double beta = 0.5;
  double lambda = 0.1;
  double learning_rate = 1e-4;
  int epochs = 200;
  int batch_size = 8;
  int de_update_period_k = 5;
  DEMode de_mode = DEMode::frozen;
  int adversary_steps_per_main_step = 1;
  std::uint64_t seed = 0;
  std::string optimizer = "adam";
};

void validate_config(const TrainConfig& config);

struct EpochRecord {
  double reconstruction_loss = 0.0;
  double adversary_loss = 0.0;
  double de_loss = 0.0;
  double segmentation_loss = 0.0;
  double total_loss = 0.0;
  std::optional<double> val_iou;
  std::optional<double> val_f1;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

// Observation points for schedule/partition audits. Phase strings:
// "adversary_step" and "main_step" (pretraining), "de_cycle_adversary" and
// "de_cycle_main" (fine-tuning DE cycles).
struct TrainHooks {
  std::function<void(const char* phase, const DEParams& de)> on_de_substep;
  std::function<void(int main_step_index)> on_de_cycle;
};

// Alternating adversarial pretraining. Per batch: the adversary takes
// adversary_steps_per_main_step updates minimizing its own reconstruction
// error with the encoder/decoder frozen, then the encoder/decoder take one
// update minimizing the bottleneck objective with the adversary frozen.
std::pair<DEParams, TrainHistory> pretrain_de(
    const std::vector<BitemporalSample>& dataset, const DEArchConfig& arch,
    const TrainConfig& config, const TrainHooks* hooks = nullptr);

struct SegTrainResult {
  BackboneParams backbone;
  std::optional<DEParams> de;
  TrainHistory history;
};

// Segmentation training. Without a DE: plain baseline on the segmentation
// loss. frozen: latents feed the backbone but DE parameters never change.
// finetune: every step updates the backbone on seg + lambda * bottleneck
// loss; every k-th main step additionally runs one DE update cycle.
SegTrainResult train_segmenter(const std::vector<BitemporalSample>& train_set,
                               const std::vector<BitemporalSample>& val_set,
                               BackboneKind kind,
                               const BackboneArchConfig& backbone_arch,
                               const std::optional<DEParams>& de,
                               const TrainConfig& config,
                               const TrainHooks* hooks = nullptr);

}  // namespace latdiff
