#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"
#include "latdiff/dataio/rten_io.hpp"

namespace latdiff {

namespace {

// Payload is little-endian f32; this code asserts a little-endian host once.
static_assert(std::endian::native == std::endian::little,
              "rten payload handling assumes a little-endian host");

}  // namespace

ImagePlane read_rten(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path);
  std::string header;
  if (!std::getline(in, header))
    fail(ErrorKind::UnsupportedFormat, "missing rten header: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::UnsupportedFormat,
         "bad rten header in " + path + ": " + e.what());
  }
  if (!j.contains("dims") || !j["dims"].is_array() || j["dims"].size() != 3)
    fail(ErrorKind::UnsupportedFormat, "rten dims must be [H,W,C]: " + path);
  if (j.value("dtype", "") != "f32")
    fail(ErrorKind::UnsupportedFormat,
         "rten dtype must be f32: " + path);
  const int h = j["dims"][0].get<int>();
  const int w = j["dims"][1].get<int>();
  const int c = j["dims"][2].get<int>();
  if (h < 1 || w < 1 || c < 1)
    fail(ErrorKind::ShapeMismatch, "rten dims out of range: " + path);

  const std::size_t count = static_cast<std::size_t>(h) * w * c;
  std::vector<float> payload(count);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float))
    fail(ErrorKind::UnsupportedFormat, "truncated rten payload: " + path);

  ImagePlane img = make_image(h, w, c);
  for (std::size_t i = 0; i < count; ++i)
    img.data.data[static_cast<Eigen::Index>(i)] = payload[i];
  if (j.contains("channels")) {
    for (const auto& name : j["channels"])
      img.channel_names.push_back(name.get<std::string>());
    if (static_cast<int>(img.channel_names.size()) != c)
      fail(ErrorKind::UnsupportedFormat,
           "rten channels list length mismatch: " + path);
  }
  return img;
}

void write_rten(const ImagePlane& image, const std::string& path) {
  image.validate("write_rten");
  nlohmann::json j;
  j["dims"] = {image.height(), image.width(), image.channels()};
  j["dtype"] = "f32";
  if (!image.channel_names.empty()) j["channels"] = image.channel_names;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path);
  out << j.dump() << '\n';
  std::vector<float> payload(image.data.size());
  for (std::size_t i = 0; i < payload.size(); ++i)
    payload[i] = static_cast<float>(image.data.data[static_cast<Eigen::Index>(i)]);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) fail(ErrorKind::IoError, "write failed: " + path);
}

}  // namespace latdiff
