#pragma once

#include <vector>

#include "latdiff/de/de_module.hpp"

namespace latdiff {

enum class ReconMetric { mse };

struct LossConfig {
  double beta = 0.5;
  double lambda = 0.1;
  ReconMetric reconstruction_metric = ReconMetric::mse;
};

// Mean over all pixels/channels of the squared difference.
double reconstruction_loss(const ImagePlane& a, const ImagePlane& b);

// Bottleneck objective: L(x_hat, post) - beta * L(x_breve, post). May be
// negative by design.
double de_loss(const ImagePlane& x_hat, const ImagePlane& x_breve,
               const ImagePlane& post, double beta);

// The adversary's own objective; it minimizes this while the encoder drives
// it up.
double adversary_loss(const ImagePlane& x_breve, const ImagePlane& post);

// Mean per-pixel 2-class cross-entropy, stable log-sum-exp. logits (H, W, 2).
double segmentation_loss(const Tensor<Real>& logits, const ChangeMask& mask);

// seg + lambda * de.
double total_loss(double seg, double de, double lambda);

// Mean de_loss over a batch, with x_hat/x_breve produced by the module's own
// forwards.
double estimate_risk(const DEParams& params,
                     const std::vector<BitemporalSample>& batch, double beta);

// Graph forms for trainers.
Var<Real> de_loss_g(const Var<Real>& x_hat, const Var<Real>& x_breve,
                    const Var<Real>& post, double beta);
Var<Real> segmentation_loss_g(const Var<Real>& logits, const ChangeMask& mask);

}  // namespace latdiff
