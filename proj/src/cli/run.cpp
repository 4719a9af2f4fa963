#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "common/json_codec.hpp"
#include "latdiff/cli/config.hpp"
#include "latdiff/cli/run.hpp"
#include "latdiff/dataio/dataset.hpp"
#include "latdiff/dataio/png_io.hpp"
#include "latdiff/dataio/synth.hpp"
#include "latdiff/evalkit/error_map.hpp"
#include "latdiff/evalkit/metrics.hpp"
#include "latdiff/evalkit/report.hpp"
#include "latdiff/evalkit/significance.hpp"
#include "latdiff/evalkit/sweep.hpp"
#include "latdiff/trainer/checkpoint.hpp"

namespace latdiff {

namespace {

// Usage problems detected after flag parsing (missing required flag
// combinations); mapped onto exit 1 like CLI11's own parse errors.
struct UsageProblem {
  std::string message;
};

void echo_config(const ResolvedConfig& cfg) {
  std::cout << "resolved config:\n" << cfg.to_json() << "\n";
}

std::string basename_of(std::string path) {
  while (!path.empty() && (path.back() == '/' || path.back() == '\\'))
    path.pop_back();
  const auto cut = path.find_last_of("/\\");
  return cut == std::string::npos ? path : path.substr(cut + 1);
}

std::vector<double> parse_beta_list(const std::string& text) {
  std::vector<double> betas;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const double b = std::stod(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      betas.push_back(b);
    } catch (...) {
      fail(ErrorKind::ParseError, "bad beta value: '" + item + "'");
    }
  }
  if (betas.empty()) fail(ErrorKind::ParseError, "empty beta list");
  return betas;
}

std::string method_label(const BackboneParams& bb, bool has_de, DEMode mode) {
  std::string m = codec::backbone_kind_name(bb.kind);
  if (has_de) m += std::string("+de-") + codec::de_mode_name(mode);
  return m;
}

struct SynthFlags {
  std::string out;
  std::uint64_t seed = 0;
  int n = 0;
  int size = 0;  // 0: keep default
  std::string nuisance;
  std::string config_path;
};

int do_synth(const SynthFlags& f) {
  std::map<std::string, std::string> ov;
  ov["synth.seed"] = std::to_string(f.seed);
  ov["synth.n_samples"] = std::to_string(f.n);
  if (f.size > 0) ov["synth.image_size"] = std::to_string(f.size);
  if (!f.nuisance.empty()) ov["synth.nuisance_brightness"] = f.nuisance;
  ResolvedConfig cfg = resolve_config(f.config_path, ov);
  echo_config(cfg);
  SynthResult result = generate_synthetic(cfg.synth);
  save_synthetic(result, f.out, cfg.to_json());
  std::cout << "wrote " << result.samples.size() << " samples to " << f.out
            << "\n";
  return 0;
}

struct PretrainFlags {
  std::string data, out, config_path;
  double beta = 0.5;
  int epochs = -1;
  std::uint64_t seed = 0;
  bool seed_given = false, beta_given = false, epochs_given = false;
};

int do_pretrain(const PretrainFlags& f) {
  std::map<std::string, std::string> ov;
  if (f.beta_given) ov["train.beta"] = std::to_string(f.beta);
  if (f.epochs_given) ov["train.epochs"] = std::to_string(f.epochs);
  if (f.seed_given) ov["train.seed"] = std::to_string(f.seed);
  ResolvedConfig cfg = resolve_config(f.config_path, ov);

  auto dataset = load_dataset(f.data, Split::train);
  if (dataset.empty()) fail(ErrorKind::EmptyDataset, "no training samples in " + f.data);
  // The architecture follows the data it will run on.
  cfg.de_arch.in_channels = static_cast<int>(dataset[0].pre.channels());
  cfg.de_arch.image_size = static_cast<int>(dataset[0].pre.height());
  echo_config(cfg);

  auto [de, history] = pretrain_de(dataset, cfg.de_arch, cfg.train);
  if (!history.epochs.empty()) {
    const auto& last = history.epochs.back();
    std::cout << "final epoch: rec=" << last.reconstruction_loss
              << " adv=" << last.adversary_loss << " de=" << last.de_loss
              << "\n";
  }
  save_checkpoint(make_de_checkpoint(de, cfg.train, cfg.to_json()), f.out);
  std::cout << "wrote " << f.out << "\n";
  return 0;
}

struct TrainFlags {
  std::string data, backbone, de_path, de_mode, input_mode, out, config_path;
  double lambda = 0.1;
  int k = 5, epochs = -1;
  std::uint64_t seed = 0;
  bool lambda_given = false, k_given = false, epochs_given = false,
       seed_given = false;
};

int do_train(const TrainFlags& f) {
  std::map<std::string, std::string> ov;
  if (!f.de_mode.empty()) ov["train.de_mode"] = f.de_mode;
  if (!f.input_mode.empty()) ov["backbone.input_mode"] = f.input_mode;
  if (f.lambda_given) ov["train.lambda"] = std::to_string(f.lambda);
  if (f.k_given) ov["train.de_update_period_k"] = std::to_string(f.k);
  if (f.epochs_given) ov["train.epochs"] = std::to_string(f.epochs);
  if (f.seed_given) ov["train.seed"] = std::to_string(f.seed);
  ResolvedConfig cfg = resolve_config(f.config_path, ov);

  // The checkpoint is opened before the flag-completeness check so a missing
  // file surfaces as the runtime failure it is, naming the path.
  std::optional<DEParams> de;
  if (!f.de_path.empty()) de = de_from_checkpoint(load_checkpoint(f.de_path));
  if (f.data.empty()) throw UsageProblem{"train requires --data"};
  if (f.out.empty()) throw UsageProblem{"train requires --out"};
  if (f.backbone.empty()) throw UsageProblem{"train requires --backbone"};
  const BackboneKind kind = codec::backbone_kind_from(f.backbone);

  auto train_set = load_dataset(f.data, Split::train);
  auto val_set = load_dataset(f.data, Split::val);
  if (train_set.empty())
    fail(ErrorKind::EmptyDataset, "no training samples in " + f.data);
  cfg.backbone_arch.in_channels = static_cast<int>(train_set[0].pre.channels());
  echo_config(cfg);

  SegTrainResult result = train_segmenter(train_set, val_set, kind,
                                          cfg.backbone_arch, de, cfg.train);
  if (!result.history.epochs.empty()) {
    const auto& last = result.history.epochs.back();
    std::cout << "final epoch: seg=" << last.segmentation_loss
              << " total=" << last.total_loss;
    if (last.val_iou) std::cout << " val_iou=" << *last.val_iou;
    std::cout << "\n";
  }
  save_checkpoint(
      make_seg_checkpoint(result.backbone, result.de, cfg.train, cfg.to_json()),
      f.out);
  std::cout << "wrote " << f.out << "\n";
  return 0;
}

struct EvalFlags {
  std::vector<std::string> ckpts;
  std::string data, report_path, maps_dir, baseline_path;
};

int do_eval(const EvalFlags& f) {
  struct Loaded {
    BackboneParams bb;
    std::optional<DEParams> de;
    TrainConfig cfg;
  };
  std::vector<Loaded> models;
  for (const auto& path : f.ckpts) {
    Checkpoint c = load_checkpoint(path);
    models.push_back(
        {backbone_from_checkpoint(c), de_from_seg_checkpoint(c),
         train_config_from_checkpoint(c)});
  }

  ResolvedConfig echo;
  echo.train = models[0].cfg;
  echo_config(echo);

  auto test_set = load_dataset(f.data, Split::test);
  if (test_set.empty())
    fail(ErrorKind::EmptyDataset, "no test samples in " + f.data);

  MetricsReport r;
  r.method = method_label(models[0].bb, models[0].de.has_value(),
                          models[0].cfg.de_mode);
  r.dataset = basename_of(f.data);
  for (const auto& m : models) {
    ConfusionCounts agg;
    for (const auto& s : test_set) {
      std::optional<LatentDifference> z;
      if (m.de) z = encode(*m.de, s.pre, s.post);
      agg += confusion(predict_mask(backbone_forward(m.bb, s.pre, s.post, z)),
                       s.mask);
    }
    r.seeds.push_back(m.cfg.seed);
    r.per_seed_iou.push_back(iou(agg));
    r.per_seed_f1.push_back(f1(agg));
  }
  finalize_stats(r);
  if (!f.baseline_path.empty()) {
    MetricsReport base = load_report(f.baseline_path);
    r.baseline = base.method;
    r.p_value = significance(r.per_seed_iou, base.per_seed_iou);
  }
  r.config_json = codec::to_json(models[0].cfg).dump();
  save_report(r, f.report_path);
  std::cout << "mean_iou=" << r.mean_iou << " mean_f1=" << r.mean_f1;
  if (r.p_value) std::cout << " p=" << *r.p_value;
  std::cout << "\nwrote " << f.report_path << "\n";

  if (!f.maps_dir.empty()) {
    std::filesystem::create_directories(f.maps_dir);
    const auto& m = models[0];
    for (const auto& s : test_set) {
      std::optional<LatentDifference> z;
      if (m.de) z = encode(*m.de, s.pre, s.post);
      ChangeMask pred = predict_mask(backbone_forward(m.bb, s.pre, s.post, z));
      write_png(render_error_map(pred, s.mask),
                f.maps_dir + "/" + s.id + "_errors.png");
    }
    std::cout << "wrote " << test_set.size() << " error maps to "
              << f.maps_dir << "\n";
  }
  return 0;
}

struct SweepFlags {
  std::string data, betas, out, config_path;
  int epochs = -1;
  std::uint64_t seed = 0;
  bool epochs_given = false, seed_given = false;
};

int do_sweep(const SweepFlags& f) {
  std::map<std::string, std::string> ov;
  if (f.epochs_given) ov["train.epochs"] = std::to_string(f.epochs);
  if (f.seed_given) ov["train.seed"] = std::to_string(f.seed);
  ResolvedConfig cfg = resolve_config(f.config_path, ov);

  auto dataset = load_dataset(f.data, Split::train);
  if (dataset.empty())
    fail(ErrorKind::EmptyDataset, "no training samples in " + f.data);
  cfg.de_arch.in_channels = static_cast<int>(dataset[0].pre.channels());
  cfg.de_arch.image_size = static_cast<int>(dataset[0].pre.height());
  echo_config(cfg);

  const std::vector<double> betas = parse_beta_list(f.betas);
  auto rows = beta_sweep(dataset, cfg.de_arch, betas, cfg.train);
  write_sweep_csv(rows, f.out, cfg.to_json());
  std::cout << "wrote " << rows.size() << " rows to " << f.out << "\n";
  return 0;
}

struct ReportFlags {
  std::vector<std::string> inputs;
  std::string table;
};

int do_report(const ReportFlags& f) {
  std::vector<MetricsReport> reports;
  for (const auto& path : f.inputs) reports.push_back(load_report(path));
  write_report_table(reports, f.table);
  std::cout << "wrote " << reports.size() << " rows to " << f.table << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& argv) {
  CLI::App app{"bitemporal change detection with latent-difference guidance"};
  app.require_subcommand(1);

  SynthFlags sf;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--out", sf.out, "output dataset directory")->required();
  synth->add_option("--seed", sf.seed, "generator seed");
  synth->add_option("--n", sf.n, "sample count")->required();
  synth->add_option("--size", sf.size, "image side length in pixels");
  synth->add_option("--nuisance", sf.nuisance,
                    "brightness shift range as LO,HI");
  synth->add_option("--config", sf.config_path, "config file");

  PretrainFlags pf;
  auto* pretrain =
      app.add_subcommand("pretrain", "pretrain the difference-embedding module");
  pretrain->add_option("--data", pf.data, "dataset directory")->required();
  auto* pbeta = pretrain->add_option("--beta", pf.beta,
                                     "adversarial bottleneck weight");
  pbeta->required();
  pretrain->add_option("--out", pf.out, "output checkpoint path")->required();
  auto* pepochs = pretrain->add_option("--epochs", pf.epochs, "epoch count");
  auto* pseed = pretrain->add_option("--seed", pf.seed, "training seed");
  pretrain->add_option("--config", pf.config_path, "config file");

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "train a segmentation backbone");
  train->add_option("--data", tf.data, "dataset directory");
  train->add_option("--backbone", tf.backbone, "unet or bit");
  train->add_option("--de", tf.de_path, "pretrained DE checkpoint");
  train->add_option("--de-mode", tf.de_mode, "frozen or finetune");
  train->add_option("--input-mode", tf.input_mode,
                    "post_only or full_concat");
  auto* tlambda =
      train->add_option("--lambda", tf.lambda, "bottleneck loss weight");
  auto* tk = train->add_option("--k", tf.k, "DE update period in main steps");
  auto* tepochs = train->add_option("--epochs", tf.epochs, "epoch count");
  auto* tseed = train->add_option("--seed", tf.seed, "training seed");
  train->add_option("--out", tf.out, "output checkpoint path");
  train->add_option("--config", tf.config_path, "config file");

  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints on a dataset");
  eval->add_option("--ckpt", ef.ckpts, "checkpoint path (repeatable)")
      ->required();
  eval->add_option("--data", ef.data, "dataset directory")->required();
  eval->add_option("--report", ef.report_path, "output report JSON")
      ->required();
  eval->add_option("--maps", ef.maps_dir, "directory for error-map PNGs");
  eval->add_option("--baseline-report", ef.baseline_path,
                   "baseline report JSON for the significance test");

  SweepFlags wf;
  auto* sweep =
      app.add_subcommand("sweep-beta", "pretrain across a list of betas");
  sweep->add_option("--data", wf.data, "dataset directory")->required();
  sweep->add_option("--betas", wf.betas, "comma-separated beta list")
      ->required();
  sweep->add_option("--out", wf.out, "output CSV path")->required();
  auto* wepochs = sweep->add_option("--epochs", wf.epochs, "epoch count");
  auto* wseed = sweep->add_option("--seed", wf.seed, "training seed");
  sweep->add_option("--config", wf.config_path, "config file");

  ReportFlags rf;
  auto* report =
      app.add_subcommand("report", "aggregate report JSONs into a table");
  report->add_option("--inputs", rf.inputs, "report JSON paths (repeatable)")
      ->required();
  report->add_option("--table", rf.table, "output CSV path")->required();

  try {
    std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1),
                                  argv.end());
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    std::cout << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  pf.beta_given = pbeta->count() > 0;
  pf.epochs_given = pepochs->count() > 0;
  pf.seed_given = pseed->count() > 0;
  tf.lambda_given = tlambda->count() > 0;
  tf.k_given = tk->count() > 0;
  tf.epochs_given = tepochs->count() > 0;
  tf.seed_given = tseed->count() > 0;
  wf.epochs_given = wepochs->count() > 0;
  wf.seed_given = wseed->count() > 0;

  try {
    if (app.got_subcommand(synth)) return do_synth(sf);
    if (app.got_subcommand(pretrain)) return do_pretrain(pf);
    if (app.got_subcommand(train)) return do_train(tf);
    if (app.got_subcommand(eval)) return do_eval(ef);
    if (app.got_subcommand(sweep)) return do_sweep(wf);
    if (app.got_subcommand(report)) return do_report(rf);
    std::cerr << "usage error: no subcommand\n";
    return 1;
  } catch (const UsageProblem& u) {
    std::cerr << "usage error: " << u.message << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace latdiff
