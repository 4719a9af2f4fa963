#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"
#include "latdiff/dataio/dataset.hpp"
#include "latdiff/dataio/png_io.hpp"
#include "latdiff/dataio/rten_io.hpp"

namespace fs = std::filesystem;

namespace latdiff {

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

namespace {

bool supported_ext(const std::string& ext) {
  return ext == ".png" || ext == ".rten";
}

// id -> filename, one entry per stem; unsupported extensions are an error.
std::map<std::string, std::string> index_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path p = entry.path();
    if (!supported_ext(p.extension().string()))
      fail(ErrorKind::UnsupportedFormat,
           "unsupported file format: " + p.string());
    const std::string id = p.stem().string();
    if (out.count(id))
      fail(ErrorKind::NameMismatch,
           "duplicate id '" + id + "' in " + dir.string());
    out[id] = p.filename().string();
  }
  return out;
}

ImagePlane load_image_any(const fs::path& p) {
  if (p.extension() == ".png") return read_png(p.string());
  return read_rten(p.string());
}

ChangeMask load_mask_any(const fs::path& p) {
  if (p.extension() == ".png") return read_mask_png(p.string());
  ImagePlane img = read_rten(p.string());
  ChangeMask m = make_mask(img.height(), img.width());
  const int c = img.channels();
  for (std::size_t i = 0; i < m.data.size(); ++i)
    m.data[i] = img.data.data[static_cast<Eigen::Index>(i) * c] >= Real(0.5)
                    ? 1
                    : 0;
  return m;
}

}  // namespace

std::vector<BitemporalSample> load_dataset(const std::string& root,
                                           Split split) {
  const fs::path rootp(root);
  for (const char* sub : {"A", "B", "label"}) {
    if (!fs::is_directory(rootp / sub))
      fail(ErrorKind::MissingDirectory,
           "missing directory: " + (rootp / sub).string());
  }
  auto a_files = index_dir(rootp / "A");
  auto b_files = index_dir(rootp / "B");
  auto l_files = index_dir(rootp / "label");

  for (const auto& [id, name] : a_files) {
    if (!b_files.count(id))
      fail(ErrorKind::NameMismatch, "id '" + id + "' present in A/ (" + name +
                                        ") but missing in B/");
    if (!l_files.count(id))
      fail(ErrorKind::NameMismatch, "id '" + id + "' present in A/ (" + name +
                                        ") but missing in label/");
  }
  for (const auto& [id, name] : b_files)
    if (!a_files.count(id))
      fail(ErrorKind::NameMismatch,
           "id '" + id + "' present in B/ (" + name + ") but missing in A/");
  for (const auto& [id, name] : l_files)
    if (!a_files.count(id))
      fail(ErrorKind::NameMismatch, "id '" + id + "' present in label/ (" +
                                        name + ") but missing in A/");

  // id set for the requested split; absent splits.json means the whole root.
  std::vector<std::string> ids;
  const fs::path splits_path = rootp / "splits.json";
  if (fs::exists(splits_path)) {
    std::ifstream in(splits_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::ParseError,
           "bad splits.json in " + root + ": " + e.what());
    }
    const std::string key = split_name(split);
    if (!j.contains(key))
      fail(ErrorKind::ParseError,
           "splits.json has no '" + key + "' entry: " + splits_path.string());
    for (const auto& id : j[key]) {
      const std::string s = id.get<std::string>();
      if (!a_files.count(s))
        fail(ErrorKind::NameMismatch,
             "splits.json names id '" + s + "' with no files on disk");
      ids.push_back(s);
    }
  } else {
    for (const auto& [id, name] : a_files) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());

  std::vector<BitemporalSample> samples;
  samples.reserve(ids.size());
  for (const auto& id : ids) {
    BitemporalSample s;
    s.id = id;
    s.pre = load_image_any(rootp / "A" / a_files[id]);
    s.post = load_image_any(rootp / "B" / b_files[id]);
    s.mask = load_mask_any(rootp / "label" / l_files[id]);
    if (s.pre.data.dims != s.post.data.dims)
      fail(ErrorKind::ShapeMismatch,
           "pre/post shape mismatch for id '" + id + "': " +
               s.pre.data.shape_str() + " vs " + s.post.data.shape_str());
    if (s.mask.h != s.pre.height() || s.mask.w != s.pre.width())
      fail(ErrorKind::ShapeMismatch,
           "mask shape mismatch for id '" + id + "'");
    s.validate();
    samples.push_back(std::move(s));
  }
  return samples;
}

void save_dataset(const std::vector<BitemporalSample>& samples,
                  const std::string& root) {
  const fs::path rootp(root);
  for (const char* sub : {"A", "B", "label"})
    fs::create_directories(rootp / sub);
  for (const auto& s : samples) {
    write_rten(s.pre, (rootp / "A" / (s.id + ".rten")).string());
    write_rten(s.post, (rootp / "B" / (s.id + ".rten")).string());
    write_mask_png(s.mask, (rootp / "label" / (s.id + ".png")).string());
  }
}

void save_nuisance_labels(const std::map<std::string, double>& labels,
                          const std::string& root) {
  nlohmann::json j(labels);
  std::ofstream out(fs::path(root) / "nuisance.json");
  if (!out) fail(ErrorKind::IoError, "cannot write nuisance.json in " + root);
  out << j.dump(2) << '\n';
}

std::map<std::string, double> load_nuisance_labels(const std::string& root) {
  const fs::path p = fs::path(root) / "nuisance.json";
  std::ifstream in(p);
  if (!in) fail(ErrorKind::IoError, "cannot open " + p.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, "bad nuisance.json: " + std::string(e.what()));
  }
  std::map<std::string, double> out;
  for (auto it = j.begin(); it != j.end(); ++it)
    out[it.key()] = it.value().get<double>();
  return out;
}

void save_splits(const std::map<std::string, std::vector<std::string>>& splits,
                 const std::string& root) {
  nlohmann::json j(splits);
  std::ofstream out(fs::path(root) / "splits.json");
  if (!out) fail(ErrorKind::IoError, "cannot write splits.json in " + root);
  out << j.dump(2) << '\n';
}

}  // namespace latdiff
