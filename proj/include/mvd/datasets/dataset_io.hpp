#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>

#include "mvd/datasets/multiview.hpp"

namespace mvd::datasets {

/// Self-describing header written as the first line of a dataset file.
struct DatasetHeader {
  int num_classes = 0;
  std::uint64_t seed = 0;
};

class DatasetFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON-lines dataset file. Line 1:
///   {"format":"mvd-multiview","version":1,"C":..,"V":..,"N":..,"dims":[..],"specific_dims":[..],"consistent_dim":..,"seed":..}
/// then one object per instance: {"id":..,"label":..,"views":[[..],..],"specific":[[..],..],"consistent":[..]}
/// (optional members are omitted when absent). Doubles round-trip exactly.
void save_dataset(const std::filesystem::path& path, const MultiViewBatch& batch, const DatasetHeader& header);

struct LoadedDataset {
  MultiViewBatch batch;
  DatasetHeader header;
};

/// Single-view files (V = 1) are accepted so representation dumps can be read back.
LoadedDataset load_dataset(const std::filesystem::path& path);

}  // namespace mvd::datasets
