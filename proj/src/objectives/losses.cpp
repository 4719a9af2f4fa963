#include "latdiff/objectives/losses.hpp"

namespace latdiff {

double reconstruction_loss(const ImagePlane& a, const ImagePlane& b) {
  require_same_shape(a.data, b.data, "reconstruction_loss");
  return (a.data.data - b.data.data).square().sum() /
         static_cast<double>(a.data.size());
}

double de_loss(const ImagePlane& x_hat, const ImagePlane& x_breve,
               const ImagePlane& post, double beta) {
  return reconstruction_loss(x_hat, post) -
         beta * reconstruction_loss(x_breve, post);
}

double adversary_loss(const ImagePlane& x_breve, const ImagePlane& post) {
  return reconstruction_loss(x_breve, post);
}

double segmentation_loss(const Tensor<Real>& logits, const ChangeMask& mask) {
  Var<Real> l = constant(logits);
  return cross_entropy2(l, mask_to_tensor(mask))->value.data[0];
}

double total_loss(double seg, double de, double lambda) {
  if (lambda < 0) fail(ErrorKind::DegenerateConfig, "total_loss: lambda < 0");
  return seg + lambda * de;
}

double estimate_risk(const DEParams& params,
                     const std::vector<BitemporalSample>& batch, double beta) {
  if (batch.empty()) fail(ErrorKind::EmptyBatch, "estimate_risk: empty batch");
  double acc = 0.0;
  for (const auto& s : batch) {
    LatentDifference z = encode(params, s.pre, s.post);
    ImagePlane x_hat = decode_conditional(params, s.pre, z);
    ImagePlane x_breve = decode_adversarial(params, z);
    acc += de_loss(x_hat, x_breve, s.post, beta);
  }
  return acc / static_cast<double>(batch.size());
}

Var<Real> de_loss_g(const Var<Real>& x_hat, const Var<Real>& x_breve,
                    const Var<Real>& post, double beta) {
  return axpby(Real(1), mse(x_hat, post), Real(-beta), mse(x_breve, post));
}

Var<Real> segmentation_loss_g(const Var<Real>& logits, const ChangeMask& mask) {
  return cross_entropy2(logits, mask_to_tensor(mask));
}

}  // namespace latdiff
