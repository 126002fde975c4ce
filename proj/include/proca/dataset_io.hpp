#pragma once

#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "proca/datagen.hpp"
#include "proca/tensor.hpp"

namespace proca {

/// On-disk dataset layout:
///   <dir>/images/NNNN.png   8-bit RGB
///   <dir>/labels/NNNN.png   8-bit single channel, pixel value = class index,
///                           0 reserved for "ignore" (absent for unlabeled splits)
///   <dir>/manifest.json     spec echo, counts and per-file CRC32 checksums
void write_dataset(const std::string& dir, const Tensor4<float>& images, const LabelMap* labels,
                   const nlohmann::json& spec_echo);

struct LoadedDataset {
  Tensor4<float> images;
  std::optional<LabelMap> labels;
};

/// Reads a dataset directory back, verifying checksums against the manifest.
LoadedDataset read_dataset(const std::string& dir);

nlohmann::json scene_to_json(const SceneSpec& spec);

std::uint32_t crc32_file(const std::string& path);

}  // namespace proca
