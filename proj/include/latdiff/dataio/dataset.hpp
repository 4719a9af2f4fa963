#pragma once

#include <map>
#include <string>
#include <vector>

#include "latdiff/dataio/image.hpp"

namespace latdiff {

enum class Split { train, val, test };

const char* split_name(Split s);

// Layout: <root>/{A,B,label}/<id>.<ext> with ext in {png, rten}. Optional
// <root>/splits.json maps split name to an id list; when absent the whole
// root is every split. Samples come back sorted by id. Files present in one
// subdirectory but not the others raise NameMismatch naming the id.
std::vector<BitemporalSample> load_dataset(const std::string& root,
                                           Split split);

// Writes samples in the same layout: A/B as .rten (float fidelity), label as
// .png. Overwrites existing files.
void save_dataset(const std::vector<BitemporalSample>& samples,
                  const std::string& root);

// <root>/nuisance.json: id -> brightness shift.
void save_nuisance_labels(const std::map<std::string, double>& labels,
                          const std::string& root);
std::map<std::string, double> load_nuisance_labels(const std::string& root);

void save_splits(const std::map<std::string, std::vector<std::string>>& splits,
                 const std::string& root);

}  // namespace latdiff
