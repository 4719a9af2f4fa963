#include <zlib.h>

#include <cstring>
#include <fstream>

#include "common/json_codec.hpp"
#include "latdiff/trainer/checkpoint.hpp"

namespace latdiff {

namespace {

constexpr char kMagic[4] = {'L', 'D', 'G', 'K'};

template <typename T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));  // little-endian host, asserted in rten_io
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > buf.size())
      fail(ErrorKind::CorruptChecksum,
           std::string("checkpoint truncated reading ") + what);
  }
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string get_str(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  nlohmann::json meta;
  if (!c.meta_json.empty()) {
    try {
      meta = nlohmann::json::parse(c.meta_json);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::ParseError,
           "checkpoint meta is not valid JSON: " + std::string(e.what()));
    }
  } else {
    meta = nlohmann::json::object();
  }
  meta["dtype"] = "f64";
  const std::string meta_text = meta.dump();

  std::string buf;
  buf.append(kMagic, 4);
  put<std::uint32_t>(buf, c.format_version);
  put<std::uint64_t>(buf, meta_text.size());
  buf += meta_text;
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(c.tensors.items.size()));
  for (const auto& [name, t] : c.tensors.items) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(name.size()));
    buf += name;
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(t.dims.size()));
    for (int d : t.dims) put<std::int32_t>(buf, d);
    const char* payload = reinterpret_cast<const char*>(t.data.data());
    buf.append(payload, static_cast<std::size_t>(t.data.size()) * sizeof(Real));
  }
  const auto crc = static_cast<std::uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(buf.size())));
  put<std::uint32_t>(buf, crc);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write checkpoint: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorKind::IoError, "checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());

  if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 4) != 0)
    fail(ErrorKind::CorruptChecksum,
         "not a checkpoint (bad magic bytes): " + path);

  Reader r{buf, 4};
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    fail(ErrorKind::VersionMismatch,
         "checkpoint format version " + std::to_string(version) +
             ", this build reads version " + std::to_string(kCheckpointVersion) +
             ": " + path);

  if (buf.size() < 4 + 4 + 4)
    fail(ErrorKind::CorruptChecksum, "checkpoint truncated: " + path);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(buf.size() - 4)));
  if (crc != stored_crc)
    fail(ErrorKind::CorruptChecksum,
         "checkpoint CRC mismatch (file damaged): " + path);

  Checkpoint c;
  c.format_version = version;
  const auto meta_len = r.get<std::uint64_t>("meta length");
  c.meta_json = r.get_str(static_cast<std::size_t>(meta_len), "metadata");

  bool payload_f32 = false;
  try {
    nlohmann::json meta = nlohmann::json::parse(c.meta_json);
    payload_f32 = meta.value("dtype", "f64") == "f32";
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::CorruptChecksum, "checkpoint metadata is not JSON: " + path);
  }

  const auto n_tensors = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const auto name_len = r.get<std::uint32_t>("tensor name length");
    const std::string name = r.get_str(name_len, "tensor name");
    const auto ndims = r.get<std::uint32_t>("tensor rank");
    std::vector<int> dims(ndims);
    std::size_t count = 1;
    for (auto& d : dims) {
      d = r.get<std::int32_t>("tensor dim");
      if (d < 1) fail(ErrorKind::CorruptChecksum, "bad tensor dim in " + path);
      count *= static_cast<std::size_t>(d);
    }
    Tensor<Real> t = Tensor<Real>::zeros(dims);
    if (payload_f32) {
      r.need(count * sizeof(float), "tensor payload");
      for (std::size_t k = 0; k < count; ++k) {
        float v;
        std::memcpy(&v, buf.data() + r.pos + k * sizeof(float), sizeof(float));
        t.data[static_cast<Eigen::Index>(k)] = v;
      }
      r.pos += count * sizeof(float);
    } else {
      r.need(count * sizeof(Real), "tensor payload");
      std::memcpy(t.data.data(), buf.data() + r.pos, count * sizeof(Real));
      r.pos += count * sizeof(Real);
    }
    c.tensors.add(name, std::move(t));
  }
  if (r.pos != buf.size() - 4)
    fail(ErrorKind::CorruptChecksum,
         "checkpoint has trailing or missing bytes: " + path);
  return c;
}

namespace {

void add_prefixed(ParamSet& dst, const std::string& prefix,
                  const ParamSet& src) {
  for (const auto& [name, t] : src.items) dst.add(prefix + name, t);
}

ParamSet strip_prefix(const ParamSet& src, const std::string& prefix) {
  ParamSet out;
  for (const auto& [name, t] : src.items)
    if (name.rfind(prefix, 0) == 0) out.add(name.substr(prefix.size()), t);
  return out;
}

}  // namespace

Checkpoint make_de_checkpoint(const DEParams& de, const TrainConfig& config,
                              const std::string& provenance_json) {
  Checkpoint c;
  nlohmann::json meta;
  meta["kind"] = "de";
  meta["de_arch"] = codec::to_json(de.arch);
  meta["train"] = codec::to_json(config);
  if (!provenance_json.empty())
    meta["provenance"] = nlohmann::json::parse(provenance_json);
  c.meta_json = meta.dump();
  add_prefixed(c.tensors, "de.enc.", de.encoder_params);
  add_prefixed(c.tensors, "de.dec.", de.decoder_params);
  add_prefixed(c.tensors, "de.adv.", de.adversary_params);
  return c;
}

DEParams de_from_checkpoint(const Checkpoint& c) {
  nlohmann::json meta = nlohmann::json::parse(c.meta_json);
  if (!meta.contains("de_arch"))
    fail(ErrorKind::MissingDE, "checkpoint has no de_arch metadata");
  DEParams de;
  de.arch = codec::de_arch_from_json(meta["de_arch"]);
  de.encoder_params = strip_prefix(c.tensors, "de.enc.");
  de.decoder_params = strip_prefix(c.tensors, "de.dec.");
  de.adversary_params = strip_prefix(c.tensors, "de.adv.");
  if (de.encoder_params.items.empty() || de.decoder_params.items.empty() ||
      de.adversary_params.items.empty())
    fail(ErrorKind::MissingDE, "checkpoint carries no DE parameter tensors");
  return de;
}

Checkpoint make_seg_checkpoint(const BackboneParams& backbone,
                               const std::optional<DEParams>& de,
                               const TrainConfig& config,
                               const std::string& provenance_json) {
  Checkpoint c;
  nlohmann::json meta;
  meta["kind"] = "seg";
  meta["backbone_kind"] = codec::backbone_kind_name(backbone.kind);
  meta["backbone_arch"] = codec::to_json(backbone.arch);
  meta["train"] = codec::to_json(config);
  if (de) meta["de_arch"] = codec::to_json(de->arch);
  if (!provenance_json.empty())
    meta["provenance"] = nlohmann::json::parse(provenance_json);
  c.meta_json = meta.dump();
  add_prefixed(c.tensors, "bb.", backbone.params);
  if (de) {
    add_prefixed(c.tensors, "de.enc.", de->encoder_params);
    add_prefixed(c.tensors, "de.dec.", de->decoder_params);
    add_prefixed(c.tensors, "de.adv.", de->adversary_params);
  }
  return c;
}

BackboneParams backbone_from_checkpoint(const Checkpoint& c) {
  nlohmann::json meta = nlohmann::json::parse(c.meta_json);
  if (!meta.contains("backbone_arch"))
    fail(ErrorKind::ParseError, "checkpoint has no backbone_arch metadata");
  BackboneParams bb;
  bb.kind = codec::backbone_kind_from(meta["backbone_kind"].get<std::string>());
  bb.arch = codec::backbone_arch_from_json(meta["backbone_arch"]);
  bb.params = strip_prefix(c.tensors, "bb.");
  if (bb.params.items.empty())
    fail(ErrorKind::ParseError, "checkpoint carries no backbone tensors");
  return bb;
}

std::optional<DEParams> de_from_seg_checkpoint(const Checkpoint& c) {
  nlohmann::json meta = nlohmann::json::parse(c.meta_json);
  if (!meta.contains("de_arch")) return std::nullopt;
  return de_from_checkpoint(c);
}

TrainConfig train_config_from_checkpoint(const Checkpoint& c) {
  nlohmann::json meta = nlohmann::json::parse(c.meta_json);
  if (!meta.contains("train")) return TrainConfig{};
  return codec::train_config_from_json(meta["train"]);
}

}  // namespace latdiff
