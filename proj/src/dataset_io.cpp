#include "proca/dataset_io.hpp"

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "proca/png_io.hpp"

namespace proca {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint32_t crc32_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("crc32_file: cannot open " + path);
  std::vector<char> buf(1 << 16);
  uLong crc = crc32(0L, Z_NULL, 0);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()),
                static_cast<uInt>(is.gcount()));
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {

std::string frame_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d.png", index);
  return buf;
}

std::string crc_hex(std::uint32_t crc) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", crc);
  return buf;
}

}  // namespace

json scene_to_json(const SceneSpec& spec) {
  return json{{"num_classes", spec.num_classes},
              {"height", spec.height},
              {"width", spec.width},
              {"shapes_min", spec.shapes_min},
              {"shapes_max", spec.shapes_max},
              {"seed", spec.seed},
              {"shift",
               {{"color_mul", spec.shift.color_mul},
                {"color_add", spec.shift.color_add},
                {"noise_sigma", spec.shift.noise_sigma},
                {"texture_swap", spec.shift.texture_swap},
                {"blur_radius", spec.shift.blur_radius}}}};
}

void write_dataset(const std::string& dir, const Tensor4<float>& images, const LabelMap* labels,
                   const json& spec_echo) {
  fs::create_directories(fs::path(dir) / "images");
  if (labels) fs::create_directories(fs::path(dir) / "labels");

  json checksums = json::object();
  for (int i = 0; i < images.n; ++i) {
    ImageU8 img;
    img.h = images.h;
    img.w = images.w;
    img.channels = 3;
    img.pixels.resize(static_cast<std::size_t>(img.h) * img.w * 3);
    for (int y = 0; y < images.h; ++y)
      for (int x = 0; x < images.w; ++x)
        for (int c = 0; c < 3; ++c) {
          const float v = images.at(i, c, y, x);
          img.at(y, x, c) = static_cast<std::uint8_t>(
              std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
        }
    const std::string rel = "images/" + frame_name(i);
    const std::string path = (fs::path(dir) / rel).string();
    write_png(path, img);
    checksums[rel] = crc_hex(crc32_file(path));

    if (labels) {
      ImageU8 lbl;
      lbl.h = labels->h;
      lbl.w = labels->w;
      lbl.channels = 1;
      lbl.pixels.resize(static_cast<std::size_t>(lbl.h) * lbl.w);
      for (int y = 0; y < labels->h; ++y)
        for (int x = 0; x < labels->w; ++x)
          lbl.at(y, x, 0) = static_cast<std::uint8_t>(labels->at(i, y, x));
      const std::string lrel = "labels/" + frame_name(i);
      const std::string lpath = (fs::path(dir) / lrel).string();
      write_png(lpath, lbl);
      checksums[lrel] = crc_hex(crc32_file(lpath));
    }
  }

  json manifest;
  manifest["format_version"] = 1;
  manifest["count"] = images.n;
  manifest["height"] = images.h;
  manifest["width"] = images.w;
  manifest["has_labels"] = labels != nullptr;
  manifest["spec"] = spec_echo;
  manifest["checksums"] = checksums;
  std::ofstream os(fs::path(dir) / "manifest.json");
  os << manifest.dump(2) << "\n";
  if (!os) throw InputError("write_dataset: cannot write manifest in " + dir);
}

LoadedDataset read_dataset(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "manifest.json");
  if (!is) throw InputError("read_dataset: missing manifest.json in " + dir);
  json manifest = json::parse(is);
  const int count = manifest.at("count").get<int>();
  const int h = manifest.at("height").get<int>();
  const int w = manifest.at("width").get<int>();
  const bool has_labels = manifest.at("has_labels").get<bool>();

  LoadedDataset ds;
  ds.images = Tensor4<float>(count, 3, h, w);
  if (has_labels) ds.labels = LabelMap(count, h, w);

  for (int i = 0; i < count; ++i) {
    const std::string rel = "images/" + frame_name(i);
    const std::string path = (fs::path(dir) / rel).string();
    const std::string expect = manifest.at("checksums").at(rel).get<std::string>();
    if (crc_hex(crc32_file(path)) != expect)
      throw InputError("read_dataset: checksum mismatch for " + path);
    const ImageU8 img = read_png(path);
    if (img.h != h || img.w != w || img.channels != 3)
      throw InputError("read_dataset: unexpected image shape in " + path);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          ds.images.at(i, c, y, x) = static_cast<float>(img.at(y, x, c)) / 255.0f;

    if (has_labels) {
      const std::string lrel = "labels/" + frame_name(i);
      const std::string lpath = (fs::path(dir) / lrel).string();
      const std::string lexpect = manifest.at("checksums").at(lrel).get<std::string>();
      if (crc_hex(crc32_file(lpath)) != lexpect)
        throw InputError("read_dataset: checksum mismatch for " + lpath);
      const ImageU8 lbl = read_png(lpath);
      if (lbl.h != h || lbl.w != w || lbl.channels != 1)
        throw InputError("read_dataset: unexpected label shape in " + lpath);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) ds.labels->at(i, y, x) = lbl.at(y, x, 0);
    }
  }
  return ds;
}

}  // namespace proca
