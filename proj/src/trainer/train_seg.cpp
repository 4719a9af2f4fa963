#include "latdiff/evalkit/metrics.hpp"
#include "latdiff/objectives/losses.hpp"
#include "latdiff/trainer/adam.hpp"
#include "latdiff/trainer/train.hpp"
#include "trainer/loop_util.hpp"

namespace latdiff {

namespace {

Var<Real> forward_g(BackboneKind kind, const VarSet& vs,
                    const BackboneArchConfig& arch, const Var<Real>& pre,
                    const Var<Real>& post, const Var<Real>* z) {
  return kind == BackboneKind::unet ? unet_forward_g(vs, arch, pre, post, z)
                                    : bit_forward_g(vs, arch, pre, post, z);
}

struct ValMetrics {
  double iou_v = 0, f1_v = 0;
};

ValMetrics validate_on(const BackboneParams& bb,
                       const std::optional<DEParams>& de,
                       const std::vector<BitemporalSample>& val_set) {
  ConfusionCounts agg;
  for (const auto& s : val_set) {
    std::optional<LatentDifference> z;
    if (de) z = encode(*de, s.pre, s.post);
    ChangeMask pred = predict_mask(backbone_forward(bb, s.pre, s.post, z));
    agg += confusion(pred, s.mask);
  }
  return {iou(agg), f1(agg)};
}

}  // namespace

SegTrainResult train_segmenter(const std::vector<BitemporalSample>& train_set,
                               const std::vector<BitemporalSample>& val_set,
                               BackboneKind kind,
                               const BackboneArchConfig& backbone_arch,
                               const std::optional<DEParams>& de,
                               const TrainConfig& config,
                               const TrainHooks* hooks) {
  if (train_set.empty())
    fail(ErrorKind::EmptyDataset, "train_segmenter: no samples");
  validate_config(config);
  const bool finetune = config.de_mode == DEMode::finetune;
  if (finetune && !de)
    fail(ErrorKind::MissingDE, "finetune mode requires a pretrained DE");

  BackboneArchConfig arch = backbone_arch;
  arch.z_channels = de ? de->arch.c_z : 0;
  BackboneParams bb = init_backbone(kind, arch, config.seed);
  std::optional<DEParams> de_work = de;

  AdamConfig adam{config.learning_rate};
  AdamState st_bb = AdamState::like(bb.params);
  AdamState st_enc, st_dec, st_adv;
  if (finetune) {
    st_enc = AdamState::like(de_work->encoder_params);
    st_dec = AdamState::like(de_work->decoder_params);
    st_adv = AdamState::like(de_work->adversary_params);
  }

  // Frozen DE never changes, so latents are computed once.
  std::vector<Tensor<Real>> frozen_z;
  if (de_work && !finetune) {
    frozen_z.reserve(train_set.size());
    for (const auto& s : train_set)
      frozen_z.push_back(encode(*de_work, s.pre, s.post).data);
  }

  Rng shuffle_rng = Rng::derived(config.seed, 200);
  TrainHistory history;
  long main_step = 0;
  const auto n = train_set.size();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = loop::shuffled_indices(n, shuffle_rng);
    const auto batches = loop::batch_ranges(n, config.batch_size);
    double sum_seg = 0, sum_total = 0, sum_rec = 0, sum_adv = 0, sum_de = 0;

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto [lo, hi] = batches[bi];
      std::vector<std::size_t> ids(order.begin() + static_cast<long>(lo),
                                   order.begin() + static_cast<long>(hi));

      // Backbone step. Latents enter as constants: DE parameters receive no
      // gradient from the segmentation objective in either mode.
      VarSet bb_vs = VarSet::lift(bb.params, true);
      std::vector<Var<Real>> terms;
      for (auto si : ids) {
        const auto& s = train_set[si];
        Var<Real> zc;
        const Var<Real>* zp = nullptr;
        if (de_work) {
          zc = constant(finetune ? encode(*de_work, s.pre, s.post).data
                                 : frozen_z[si]);
          zp = &zc;
        }
        Var<Real> logits = forward_g(kind, bb_vs, arch, constant(s.pre.data),
                                     constant(s.post.data), zp);
        terms.push_back(segmentation_loss_g(logits, s.mask));
      }
      Var<Real> seg = loop::mean_of(terms);
      const double seg_v = seg->value.data[0];
      loop::require_finite_loss(seg_v, "segmentation loss", epoch, bi);
      backward(seg);
      adam_step(bb.params, bb_vs.grads(), st_bb, adam);
      main_step += 1;

      double de_v = 0;
      if (finetune) {
        // Bottleneck term of the combined objective, recorded per batch.
        double rec_b = 0, adv_b = 0;
        for (auto si : ids) {
          const auto& s = train_set[si];
          LatentDifference z = encode(*de_work, s.pre, s.post);
          ImagePlane xh = decode_conditional(*de_work, s.pre, z);
          ImagePlane xb = decode_adversarial(*de_work, z);
          rec_b += reconstruction_loss(xh, s.post);
          adv_b += adversary_loss(xb, s.post);
        }
        rec_b /= static_cast<double>(ids.size());
        adv_b /= static_cast<double>(ids.size());
        de_v = rec_b - config.beta * adv_b;
        sum_rec += rec_b;
        sum_adv += adv_b;

        // Two-tier schedule: one full DE cycle every k-th main step.
        if (main_step % config.de_update_period_k == 0) {
          std::vector<Tensor<Real>> z_const;
          for (auto si : ids)
            z_const.push_back(
                encode(*de_work, train_set[si].pre, train_set[si].post).data);
          for (int a = 0; a < config.adversary_steps_per_main_step; ++a) {
            VarSet adv = VarSet::lift(de_work->adversary_params, true);
            std::vector<Var<Real>> at;
            for (std::size_t i = 0; i < ids.size(); ++i) {
              Var<Real> xb = decode_adversarial_g(adv, de_work->arch,
                                                  constant(z_const[i]));
              at.push_back(mse(xb, constant(train_set[ids[i]].post.data)));
            }
            Var<Real> aloss = loop::mean_of(at);
            loop::require_finite_loss(aloss->value.data[0],
                                      "adversary loss", epoch, bi);
            backward(aloss);
            adam_step(de_work->adversary_params, adv.grads(), st_adv, adam);
            if (hooks && hooks->on_de_substep)
              hooks->on_de_substep("de_cycle_adversary", *de_work);
          }
          VarSet enc = VarSet::lift(de_work->encoder_params, true);
          VarSet dec = VarSet::lift(de_work->decoder_params, true);
          VarSet advf = VarSet::lift(de_work->adversary_params, false);
          std::vector<Var<Real>> rt, bt;
          for (auto si : ids) {
            const auto& s = train_set[si];
            Var<Real> pre = constant(s.pre.data);
            Var<Real> post = constant(s.post.data);
            Var<Real> z = encode_g(enc, de_work->arch, pre, post);
            rt.push_back(
                mse(decode_conditional_g(dec, de_work->arch, pre, z), post));
            bt.push_back(
                mse(decode_adversarial_g(advf, de_work->arch, z), post));
          }
          Var<Real> de_l = axpby(Real(1), loop::mean_of(rt),
                                 Real(-config.beta), loop::mean_of(bt));
          loop::require_finite_loss(de_l->value.data[0], "bottleneck loss",
                                    epoch, bi);
          backward(de_l);
          adam_step(de_work->encoder_params, enc.grads(), st_enc, adam);
          adam_step(de_work->decoder_params, dec.grads(), st_dec, adam);
          if (hooks && hooks->on_de_substep)
            hooks->on_de_substep("de_cycle_main", *de_work);
          if (hooks && hooks->on_de_cycle)
            hooks->on_de_cycle(static_cast<int>(main_step));
        }
      }

      sum_seg += seg_v;
      sum_de += de_v;
      sum_total += total_loss(seg_v, de_v, finetune ? config.lambda : 0.0);
    }

    EpochRecord rec{};
    const auto nb = static_cast<double>(batches.size());
    rec.segmentation_loss = sum_seg / nb;
    rec.de_loss = sum_de / nb;
    rec.reconstruction_loss = sum_rec / nb;
    rec.adversary_loss = sum_adv / nb;
    rec.total_loss = sum_total / nb;
    if (!val_set.empty()) {
      ValMetrics vm = validate_on(bb, de_work, val_set);
      rec.val_iou = vm.iou_v;
      rec.val_f1 = vm.f1_v;
    }
    history.epochs.push_back(rec);
  }
  return {std::move(bb), std::move(de_work), std::move(history)};
}

}  // namespace latdiff
