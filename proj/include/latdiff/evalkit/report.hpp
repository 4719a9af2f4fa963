#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace latdiff {

// One method's multi-seed evaluation, serialized as the report JSON:
// {method, dataset, seeds, per_seed:{iou, f1}, mean_iou, std_iou, mean_f1,
//  std_f1, baseline, p_value, paper_reference?, config?}.
struct MetricsReport {
  std::string method;
  std::string dataset;
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed_iou;
  std::vector<double> per_seed_f1;
  double mean_iou = 0.0;
  double std_iou = 0.0;  // sample std, n-1
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  std::string baseline;               // empty when no comparison was made
  std::optional<double> p_value;      // vs baseline, one-sided (this > that)
  std::string paper_reference_json;   // verbatim JSON object, may be empty
  std::string config_json;            // resolved config provenance
};

// Fills mean/std from the per-seed lists (sample std; 0 for n < 2).
void finalize_stats(MetricsReport& r);

std::string report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const std::string& text);

void save_report(const MetricsReport& r, const std::string& path);
MetricsReport load_report(const std::string& path);

// Aggregates reports into a CSV table:
// method,dataset,n_seeds,mean_iou,std_iou,mean_f1,std_f1,baseline,p_value.
void write_report_table(const std::vector<MetricsReport>& reports,
                        const std::string& csv_path);

}  // namespace latdiff
