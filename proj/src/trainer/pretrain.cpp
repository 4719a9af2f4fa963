#include "latdiff/objectives/losses.hpp"
#include "latdiff/trainer/adam.hpp"
#include "latdiff/trainer/train.hpp"
#include "trainer/loop_util.hpp"

namespace latdiff {

void validate_config(const TrainConfig& config) {
  if (!(config.learning_rate > 0))
    fail(ErrorKind::DegenerateConfig, "learning_rate must be > 0");
  if (config.epochs < 1) fail(ErrorKind::DegenerateConfig, "epochs must be >= 1");
  if (config.batch_size < 1)
    fail(ErrorKind::DegenerateConfig, "batch_size must be >= 1");
  if (config.de_update_period_k < 1)
    fail(ErrorKind::DegenerateConfig, "de_update_period_k must be >= 1");
  if (config.adversary_steps_per_main_step < 0)
    fail(ErrorKind::DegenerateConfig,
         "adversary_steps_per_main_step must be >= 0");
  if (config.beta < 0 || !std::isfinite(config.beta))
    fail(ErrorKind::DegenerateConfig, "beta must be finite and >= 0");
  if (config.lambda < 0 || !std::isfinite(config.lambda))
    fail(ErrorKind::DegenerateConfig, "lambda must be finite and >= 0");
  if (config.optimizer != "adam")
    fail(ErrorKind::DegenerateConfig,
         "unknown optimizer: " + config.optimizer);
}

std::pair<DEParams, TrainHistory> pretrain_de(
    const std::vector<BitemporalSample>& dataset, const DEArchConfig& arch,
    const TrainConfig& config, const TrainHooks* hooks) {
  if (dataset.empty()) fail(ErrorKind::EmptyDataset, "pretrain_de: no samples");
  validate_config(config);
  validate_arch(arch);
  for (const auto& s : dataset)
    if (s.pre.data.dims !=
        std::vector<int>{arch.image_size, arch.image_size, arch.in_channels})
      fail(ErrorKind::ShapeMismatch,
           "pretrain_de: sample " + s.id + " is " + s.pre.data.shape_str() +
               ", arch expects " + std::to_string(arch.image_size) + "x" +
               std::to_string(arch.image_size) + "x" +
               std::to_string(arch.in_channels));

  DEParams de = init_de(arch, config.seed);
  AdamConfig adam{config.learning_rate};
  AdamState st_enc = AdamState::like(de.encoder_params);
  AdamState st_dec = AdamState::like(de.decoder_params);
  AdamState st_adv = AdamState::like(de.adversary_params);
  Rng shuffle_rng = Rng::derived(config.seed, 100);

  TrainHistory history;
  const auto n = dataset.size();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = loop::shuffled_indices(n, shuffle_rng);
    const auto batches = loop::batch_ranges(n, config.batch_size);
    double sum_rec = 0, sum_adv = 0, sum_de = 0;

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto [lo, hi] = batches[bi];
      std::vector<const BitemporalSample*> batch;
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(&dataset[order[i]]);

      // Latents are fixed while only the adversary moves.
      std::vector<Tensor<Real>> z_const;
      z_const.reserve(batch.size());
      for (const auto* s : batch)
        z_const.push_back(encode(de, s->pre, s->post).data);

      for (int a = 0; a < config.adversary_steps_per_main_step; ++a) {
        VarSet adv = VarSet::lift(de.adversary_params, true);
        std::vector<Var<Real>> terms;
        for (std::size_t i = 0; i < batch.size(); ++i) {
          Var<Real> xb = decode_adversarial_g(adv, arch, constant(z_const[i]));
          terms.push_back(mse(xb, constant(batch[i]->post.data)));
        }
        Var<Real> loss = loop::mean_of(terms);
        loop::require_finite_loss(loss->value.data[0], "adversary loss", epoch,
                                  bi);
        backward(loss);
        adam_step(de.adversary_params, adv.grads(), st_adv, adam);
        if (hooks && hooks->on_de_substep)
          hooks->on_de_substep("adversary_step", de);
      }

      VarSet enc = VarSet::lift(de.encoder_params, true);
      VarSet dec = VarSet::lift(de.decoder_params, true);
      VarSet adv = VarSet::lift(de.adversary_params, false);
      std::vector<Var<Real>> rec_terms, adv_terms;
      for (const auto* s : batch) {
        Var<Real> pre = constant(s->pre.data);
        Var<Real> post = constant(s->post.data);
        Var<Real> z = encode_g(enc, arch, pre, post);
        Var<Real> x_hat = decode_conditional_g(dec, arch, pre, z);
        Var<Real> x_breve = decode_adversarial_g(adv, arch, z);
        rec_terms.push_back(mse(x_hat, post));
        adv_terms.push_back(mse(x_breve, post));
      }
      Var<Real> rec = loop::mean_of(rec_terms);
      Var<Real> advl = loop::mean_of(adv_terms);
      Var<Real> de_l = axpby(Real(1), rec, Real(-config.beta), advl);
      loop::require_finite_loss(de_l->value.data[0], "bottleneck loss", epoch,
                                bi);
      backward(de_l);
      adam_step(de.encoder_params, enc.grads(), st_enc, adam);
      adam_step(de.decoder_params, dec.grads(), st_dec, adam);
      if (hooks && hooks->on_de_substep) hooks->on_de_substep("main_step", de);

      sum_rec += rec->value.data[0];
      sum_adv += advl->value.data[0];
      sum_de += de_l->value.data[0];
    }

    EpochRecord rec{};
    const auto nb = static_cast<double>(batches.size());
    rec.reconstruction_loss = sum_rec / nb;
    rec.adversary_loss = sum_adv / nb;
    rec.de_loss = sum_de / nb;
    history.epochs.push_back(rec);
  }
  return {std::move(de), std::move(history)};
}

}  // namespace latdiff
