#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "latdiff/cli/config.hpp"
#include "latdiff/cli/run.hpp"
#include "latdiff/dataio/dataset.hpp"
#include "latdiff/evalkit/report.hpp"
#include "latdiff/trainer/checkpoint.hpp"

using namespace latdiff;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "latdiff");
  std::ostringstream out, err;
  std::streambuf* old_out = std::cout.rdbuf(out.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(err.rdbuf());
  CliResult r;
  try {
    r.code = run(args);
  } catch (...) {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    throw;
  }
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("latdiff_cli_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative path -> file bytes for a whole tree.
std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("config text: sections, comments, and trimming") {
  ResolvedConfig cfg;
  apply_config_text(cfg,
                    "# pipeline settings\n"
                    "beta = 1.5\n"
                    "epochs=3   # trailing comment\n"
                    "\n"
                    "[de]\n"
                    "c_z = 7\n"
                    "[backbone]\n"
                    "input_mode = full_concat\n"
                    "[synth]\n"
                    "n_samples = 12\n"
                    "nuisance_brightness = -0.4, 0.4\n");
  CHECK(cfg.train.beta == 1.5);  // unsectioned keys belong to train
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.de_arch.c_z == 7);
  CHECK(cfg.backbone_arch.input_mode == InputMode::full_concat);
  CHECK(cfg.synth.n_samples == 12);
  CHECK(cfg.synth.nuisance_brightness_range.lo == -0.4);
  CHECK(cfg.synth.nuisance_brightness_range.hi == 0.4);
  // Untouched fields keep their defaults.
  CHECK(cfg.train.lambda == 0.1);
  CHECK(cfg.de_arch.base_width == 32);
}

TEST_CASE("config text: unknown keys and malformed lines are named") {
  ResolvedConfig cfg;
  try {
    apply_config_text(cfg, "betaa = 1.0\n");
    FAIL("expected UnknownKey");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownKey);
    CHECK(std::string(e.what()).find("betaa") != std::string::npos);
  }
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "[nosuch]\nx = 1\n"),
                       doctest::Contains("nosuch"), Error);

  // Line numbers point at the offending line.
  try {
    apply_config_text(cfg, "beta = 0.5\nepochs = 2\njust words\n");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "beta = two\n"),
                       doctest::Contains("beta"), Error);
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "\n[train\n"),
                       doctest::Contains("line 2"), Error);
  CHECK_THROWS_AS(apply_config_text(cfg, "= 3\n"), Error);
  CHECK_THROWS_AS(apply_config_text(cfg, "[synth]\nn_samples = 1.5\n"), Error);
}

TEST_CASE("config resolution: flags beat file beats defaults") {
  const fs::path dir = temp_dir("cfg");
  const fs::path file = dir / "run.cfg";
  std::ofstream(file) << "beta = 1.5\nepochs = 3\n[de]\nc_z = 6\n";

  ResolvedConfig cfg = resolve_config(
      file.string(), {{"train.beta", "0.25"}, {"backbone.depth", "2"}});
  CHECK(cfg.train.beta == 0.25);   // flag wins over file
  CHECK(cfg.train.epochs == 3);    // file wins over default
  CHECK(cfg.de_arch.c_z == 6);
  CHECK(cfg.backbone_arch.depth == 2);
  CHECK(cfg.train.batch_size == 8);  // untouched default

  CHECK_THROWS_AS(resolve_config((dir / "absent.cfg").string(), {}), Error);
  CHECK_THROWS_AS(resolve_config("", {{"beta", "0.5"}}), Error);
  CHECK_THROWS_AS(resolve_config("", {{"train.betaa", "0.5"}}), Error);

  // The echoed form is valid JSON covering all four sections.
  const auto j = nlohmann::json::parse(cfg.to_json());
  CHECK(j.contains("train"));
  CHECK(j.contains("de"));
  CHECK(j.contains("backbone"));
  CHECK(j.contains("synth"));
  CHECK(j["train"]["beta"].get<double>() == 0.25);
}

TEST_CASE("cli: help and usage errors") {
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"bogus"}).code == 1);

  CliResult help = run_cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("synth") != std::string::npos);
  CHECK(help.out.find("pretrain") != std::string::npos);

  CliResult sub = run_cli({"train", "--help"});
  CHECK(sub.code == 0);
  CHECK(sub.out.find("--backbone") != std::string::npos);

  CliResult missing = run_cli({"synth", "--out", "x"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("usage error") != std::string::npos);

  CHECK(run_cli({"synth", "--out", "x", "--n", "4", "--bogus"}).code == 1);
}

TEST_CASE("cli: synth output is byte-deterministic for a fixed seed") {
  const fs::path dir = temp_dir("synthdet");
  const fs::path a = dir / "a", b = dir / "b", c = dir / "c";
  for (const auto& target : {a, b}) {
    CliResult r = run_cli({"synth", "--out", target.string(), "--n", "8",
                           "--size", "16", "--seed", "3"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("resolved config:") != std::string::npos);
    CHECK(r.out.find("wrote 8 samples") != std::string::npos);
  }
  const auto ta = tree_bytes(a), tb = tree_bytes(b);
  REQUIRE_FALSE(ta.empty());
  REQUIRE(ta.size() == tb.size());
  for (const auto& [rel, bytes] : ta) {
    REQUIRE(tb.count(rel) == 1);
    CHECK(tb.at(rel) == bytes);
  }
  // A different seed changes the bytes.
  REQUIRE(run_cli({"synth", "--out", c.string(), "--n", "8", "--size", "16",
                   "--seed", "4"})
              .code == 0);
  const auto tc = tree_bytes(c);
  bool any_diff = false;
  for (const auto& [rel, bytes] : tc)
    if (!ta.count(rel) || ta.at(rel) != bytes) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("cli: runtime failures exit 2 with a structured error line") {
  const fs::path dir = temp_dir("fail");
  // The DE checkpoint is opened before required-flag validation, so a bad
  // path is a runtime failure naming the file, not a usage error.
  CliResult r = run_cli({"train", "--de", (dir / "missing.ckpt").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(r.err.find("missing.ckpt") != std::string::npos);

  // Same flags minus --de: now it is a usage problem.
  CliResult u = run_cli({"train"});
  CHECK(u.code == 1);
  CHECK(u.err.find("usage error") != std::string::npos);
  CHECK(u.err.find("--data") != std::string::npos);

  CliResult e = run_cli({"eval", "--ckpt", (dir / "none.ckpt").string(),
                         "--data", dir.string(), "--report",
                         (dir / "r.json").string()});
  CHECK(e.code == 2);
}

TEST_CASE("cli: full pipeline on a small synthetic set") {
  const fs::path dir = temp_dir("pipeline");
  const fs::path data = dir / "data";
  REQUIRE(run_cli({"synth", "--out", data.string(), "--n", "8", "--size",
                   "16", "--seed", "0"})
              .code == 0);
  REQUIRE(load_dataset(data.string(), Split::train).size() == 5);
  REQUIRE(load_dataset(data.string(), Split::val).size() == 1);
  REQUIRE(load_dataset(data.string(), Split::test).size() == 2);

  // Pretrain; flag overrides the config file's beta and the echo proves it.
  const fs::path cfgfile = dir / "run.cfg";
  std::ofstream(cfgfile) << "beta = 1.5\n[de]\nc_z = 4\nbase_width = 4\n";
  const fs::path de_ckpt = dir / "de.ckpt";
  CliResult pre = run_cli({"pretrain", "--data", data.string(), "--config",
                           cfgfile.string(), "--beta", "0.1", "--epochs", "1",
                           "--out", de_ckpt.string()});
  REQUIRE(pre.code == 0);
  CHECK(pre.out.find("\"beta\": 0.1") != std::string::npos);
  CHECK(pre.out.find("final epoch: rec=") != std::string::npos);
  Checkpoint dc = load_checkpoint(de_ckpt.string());
  DEParams de = de_from_checkpoint(dc);
  CHECK(de.arch.in_channels == 3);   // follows the data
  CHECK(de.arch.image_size == 16);
  CHECK(de.arch.c_z == 4);           // from the config file

  // Two baseline trainings with different seeds, then a two-seed eval.
  const fs::path bb_cfg = dir / "bb.cfg";
  std::ofstream(bb_cfg) << "[backbone]\nbase_width = 4\ndepth = 2\n";
  const fs::path ck0 = dir / "s0.ckpt", ck1 = dir / "s1.ckpt";
  REQUIRE(run_cli({"train", "--data", data.string(), "--backbone", "unet",
                   "--config", bb_cfg.string(), "--epochs", "1", "--seed",
                   "0", "--out", ck0.string()})
              .code == 0);
  REQUIRE(run_cli({"train", "--data", data.string(), "--backbone", "unet",
                   "--config", bb_cfg.string(), "--epochs", "1", "--seed",
                   "1", "--out", ck1.string()})
              .code == 0);

  const fs::path base_report = dir / "baseline.json";
  CliResult ev = run_cli({"eval", "--ckpt", ck0.string(), "--ckpt",
                          ck1.string(), "--data", data.string(), "--report",
                          base_report.string()});
  REQUIRE(ev.code == 0);
  MetricsReport base = load_report(base_report.string());
  CHECK(base.method == "unet");
  CHECK(base.seeds == std::vector<std::uint64_t>({0, 1}));
  CHECK(base.per_seed_iou.size() == 2);
  for (double v : base.per_seed_iou) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_FALSE(base.p_value.has_value());

  // Guided training consumes the pretrained DE; eval against the baseline
  // attaches a significance value.
  const fs::path g0 = dir / "g0.ckpt", g1 = dir / "g1.ckpt";
  for (int seed = 0; seed < 2; ++seed) {
    CliResult tr = run_cli({"train", "--data", data.string(), "--backbone",
                            "unet", "--config", bb_cfg.string(), "--de",
                            de_ckpt.string(), "--de-mode", "frozen",
                            "--epochs", "1", "--seed", std::to_string(seed),
                            "--out",
                            (seed == 0 ? g0 : g1).string()});
    REQUIRE(tr.code == 0);
  }
  const fs::path g_report = dir / "guided.json";
  CliResult ge = run_cli({"eval", "--ckpt", g0.string(), "--ckpt",
                          g1.string(), "--data", data.string(), "--report",
                          g_report.string(), "--baseline-report",
                          base_report.string(), "--maps",
                          (dir / "maps").string()});
  REQUIRE(ge.code == 0);
  MetricsReport guided = load_report(g_report.string());
  CHECK(guided.method == "unet+de-frozen");
  CHECK(guided.baseline == "unet");
  REQUIRE(guided.p_value.has_value());
  CHECK(*guided.p_value >= 0.0);
  CHECK(*guided.p_value <= 1.0);
  CHECK(fs::exists(dir / "maps"));
  int maps = 0;
  for (const auto& e : fs::directory_iterator(dir / "maps")) {
    CHECK(e.path().extension() == ".png");
    ++maps;
  }
  CHECK(maps == 2);  // one error map per test sample

  // The guided checkpoint carries the DE; a DE checkpoint is not a valid
  // segmentation checkpoint.
  Checkpoint gc = load_checkpoint(g0.string());
  CHECK(de_from_seg_checkpoint(gc).has_value());
  CliResult bad = run_cli({"eval", "--ckpt", de_ckpt.string(), "--data",
                           data.string(), "--report",
                           (dir / "x.json").string()});
  CHECK(bad.code == 2);

  // Aggregate the two reports into a table.
  const fs::path table = dir / "table.csv";
  CliResult rp = run_cli({"report", "--inputs", base_report.string(),
                          "--inputs", g_report.string(), "--table",
                          table.string()});
  REQUIRE(rp.code == 0);
  std::istringstream lines(slurp(table));
  std::string line;
  int n_lines = 0;
  while (std::getline(lines, line)) ++n_lines;
  CHECK(n_lines == 3);  // header + two methods

  // Beta sweep over the same data.
  const fs::path sweep_csv = dir / "sweep.csv";
  CliResult sw = run_cli({"sweep-beta", "--data", data.string(), "--config",
                          cfgfile.string(), "--betas", "0.0,0.5", "--epochs",
                          "1", "--out", sweep_csv.string()});
  REQUIRE(sw.code == 0);
  const std::string sweep_text = slurp(sweep_csv);
  CHECK(sweep_text.rfind("beta,rec_loss,adv_loss\n", 0) == 0);
  CHECK(fs::exists(sweep_csv.string() + ".meta.json"));
  CHECK(run_cli({"sweep-beta", "--data", data.string(), "--betas", "0.5,,1",
                 "--out", sweep_csv.string()})
            .code == 2);
}
