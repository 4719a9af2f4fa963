#include <cmath>
#include <fstream>
#include <sstream>

#include "latdiff/core/error.hpp"
#include "latdiff/evalkit/report.hpp"
#include "json.hpp"

namespace latdiff {

using nlohmann::json;

void finalize_stats(MetricsReport& r) {
  const auto stats = [](const std::vector<double>& v, double& m, double& s) {
    m = 0.0;
    s = 0.0;
    if (v.empty()) return;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    s = std::sqrt(acc / static_cast<double>(v.size() - 1));
  };
  stats(r.per_seed_iou, r.mean_iou, r.std_iou);
  stats(r.per_seed_f1, r.mean_f1, r.std_f1);
}

std::string report_to_json(const MetricsReport& r) {
  if (r.per_seed_iou.size() != r.seeds.size() ||
      r.per_seed_f1.size() != r.seeds.size())
    fail(ErrorKind::ShapeMismatch,
         "report_to_json: seeds and per-seed metric lists differ in length");
  json j;
  j["method"] = r.method;
  j["dataset"] = r.dataset;
  j["seeds"] = r.seeds;
  j["per_seed"] = {{"iou", r.per_seed_iou}, {"f1", r.per_seed_f1}};
  j["mean_iou"] = r.mean_iou;
  j["std_iou"] = r.std_iou;
  j["mean_f1"] = r.mean_f1;
  j["std_f1"] = r.std_f1;
  j["baseline"] = r.baseline;
  if (r.p_value) j["p_value"] = *r.p_value;
  if (!r.paper_reference_json.empty()) {
    json ref = json::parse(r.paper_reference_json, nullptr, false);
    if (ref.is_discarded())
      fail(ErrorKind::ParseError, "report_to_json: reference block is not JSON");
    j["paper_reference"] = ref;
  }
  if (!r.config_json.empty()) {
    json cfg = json::parse(r.config_json, nullptr, false);
    if (cfg.is_discarded())
      fail(ErrorKind::ParseError, "report_to_json: config block is not JSON");
    j["config"] = cfg;
  }
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    fail(ErrorKind::ParseError, "report: top level is not a JSON object");
  MetricsReport r;
  try {
    r.method = j.at("method").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    const json& ps = j.at("per_seed");
    r.per_seed_iou = ps.at("iou").get<std::vector<double>>();
    r.per_seed_f1 = ps.at("f1").get<std::vector<double>>();
    r.mean_iou = j.at("mean_iou").get<double>();
    r.std_iou = j.at("std_iou").get<double>();
    r.mean_f1 = j.at("mean_f1").get<double>();
    r.std_f1 = j.at("std_f1").get<double>();
    r.baseline = j.at("baseline").get<std::string>();
    if (j.contains("p_value")) r.p_value = j.at("p_value").get<double>();
    if (j.contains("paper_reference"))
      r.paper_reference_json = j.at("paper_reference").dump();
    if (j.contains("config")) r.config_json = j.at("config").dump();
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("report: ") + e.what());
  }
  if (r.per_seed_iou.size() != r.seeds.size() ||
      r.per_seed_f1.size() != r.seeds.size())
    fail(ErrorKind::ParseError,
         "report: per_seed lists do not match the seed count");
  return r;
}

void save_report(const MetricsReport& r, const std::string& path) {
  const std::string text = report_to_json(r);
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open for write: " + path);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) fail(ErrorKind::IoError, "short write: " + path);
}

MetricsReport load_report(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return report_from_json(ss.str());
}

void write_report_table(const std::vector<MetricsReport>& reports,
                        const std::string& csv_path) {
  std::ostringstream out;
  out << "method,dataset,n_seeds,mean_iou,std_iou,mean_f1,std_f1,baseline,"
         "p_value\n";
  out.precision(17);
  for (const auto& r : reports) {
    out << r.method << ',' << r.dataset << ',' << r.seeds.size() << ','
        << r.mean_iou << ',' << r.std_iou << ',' << r.mean_f1 << ','
        << r.std_f1 << ',' << r.baseline << ',';
    if (r.p_value) out << *r.p_value;
    out << '\n';
  }
  std::ofstream f(csv_path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open for write: " + csv_path);
  const std::string text = out.str();
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) fail(ErrorKind::IoError, "short write: " + csv_path);
}

}  // namespace latdiff
