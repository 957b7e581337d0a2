#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "mvd/datasets/multiview.hpp"

namespace mvd::datasets {

enum class IdxErrorKind { kIo, kBadMagic, kTruncated, kDimMismatch };

class IdxError : public std::runtime_error {
 public:
  IdxError(IdxErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  IdxErrorKind kind() const { return kind_; }

 private:
  IdxErrorKind kind_;
};

/// Grayscale images flattened row-major, one image per matrix row, values in [0,1].
struct ImageSet {
  Matrix pixels;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return static_cast<std::size_t>(pixels.rows()); }
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Reads an unsigned-byte rank-3 IDX file (magic 0x00000803). Pixels are scaled by 1/255.
ImageSet load_idx_images(const std::filesystem::path& path);
/// Reads an unsigned-byte rank-1 IDX file (magic 0x00000801).
std::vector<int> load_idx_labels(const std::filesystem::path& path);

struct LabeledImages {
  ImageSet images;
  std::vector<int> labels;
};

/// Loads a matching image/label pair; the counts must agree.
LabeledImages load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Writers producing the same format (pixels are rounded to bytes).
void write_idx_images(const std::filesystem::path& path, const ImageSet& images);
void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels);

/// Gradient magnitude of the 3x3 Sobel pair with replicated borders, rescaled
/// to [0,1] per image. A constant image maps to all zeros.
ImageSet edge_view(const ImageSet& images);

/// Two-view dataset: the original digits and their edge maps, on a seeded
/// random subset of `subset` instances (all instances when subset is 0 or too large).
MultiViewBatch make_edge_dataset(const LabeledImages& data, std::size_t subset, std::uint64_t seed);

}  // namespace mvd::datasets
