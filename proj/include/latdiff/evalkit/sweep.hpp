#pragma once

#include <string>
#include <vector>

#include "latdiff/trainer/train.hpp"

namespace latdiff {

struct SweepRow {
  double beta = 0.0;
  double rec_loss = 0.0;  // final-epoch reconstruction loss
  double adv_loss = 0.0;  // final-epoch adversary loss
};

// Pretrains once per beta with identical seed and budget; rows come back in
// the order betas were given.
std::vector<SweepRow> beta_sweep(const std::vector<BitemporalSample>& dataset,
                                 const DEArchConfig& arch,
                                 const std::vector<double>& betas,
                                 const TrainConfig& config);

// CSV: header beta,rec_loss,adv_loss, one full-precision row per beta. A
// sidecar <path>.meta.json records the resolved config for provenance.
void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::string& path,
                     const std::string& provenance_json = "");

}  // namespace latdiff
