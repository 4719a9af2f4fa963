#include <fstream>
#include <sstream>

#include "latdiff/core/error.hpp"
#include "latdiff/evalkit/sweep.hpp"
#include "latdiff/objectives/losses.hpp"

namespace latdiff {

std::vector<SweepRow> beta_sweep(const std::vector<BitemporalSample>& dataset,
                                 const DEArchConfig& arch,
                                 const std::vector<double>& betas,
                                 const TrainConfig& config) {
  std::vector<SweepRow> rows;
  rows.reserve(betas.size());
  for (double beta : betas) {
    TrainConfig c = config;  // identical seed and budget across the sweep
    c.beta = beta;
    DEParams de = pretrain_de(dataset, arch, c).first;
    // Measured on the final parameters over the whole set, not the running
    // epoch mean: the row reflects the model the sweep actually produced.
    double rec = 0.0, adv = 0.0;
    for (const auto& s : dataset) {
      LatentDifference z = encode(de, s.pre, s.post);
      rec += reconstruction_loss(decode_conditional(de, s.pre, z), s.post);
      adv += adversary_loss(decode_adversarial(de, z), s.post);
    }
    const auto n = static_cast<double>(dataset.size());
    rows.push_back({beta, rec / n, adv / n});
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::string& path,
                     const std::string& provenance_json) {
  std::ostringstream out;
  out << "beta,rec_loss,adv_loss\n";
  out.precision(17);
  for (const auto& r : rows)
    out << r.beta << ',' << r.rec_loss << ',' << r.adv_loss << '\n';
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open for write: " + path);
  const std::string text = out.str();
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) fail(ErrorKind::IoError, "short write: " + path);
  if (!provenance_json.empty()) {
    std::ofstream m(path + ".meta.json", std::ios::binary);
    if (!m) fail(ErrorKind::IoError, "cannot open for write: " + path + ".meta.json");
    m.write(provenance_json.data(),
            static_cast<std::streamsize>(provenance_json.size()));
    if (!m) fail(ErrorKind::IoError, "short write: " + path + ".meta.json");
  }
}

}  // namespace latdiff
