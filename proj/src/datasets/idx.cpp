#include "mvd/datasets/idx.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

namespace mvd::datasets {

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxErrorKind::kIo, "cannot open IDX file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                              static_cast<char>(v)};
  out.write(b.data(), 4);
}

struct IdxHeader {
  std::vector<std::uint32_t> dims;
  std::size_t payload_offset = 0;
};

IdxHeader parse_header(const std::vector<unsigned char>& bytes, std::uint32_t expected_magic,
                       const std::filesystem::path& path) {
  if (bytes.size() < 4) throw IdxError(IdxErrorKind::kTruncated, "IDX header truncated: " + path.string());
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != expected_magic) {
    // Same leading bytes and element type but another rank is a shape problem, not a foreign file.
    if ((magic & 0xFFFFFF00u) == (expected_magic & 0xFFFFFF00u)) {
      throw IdxError(IdxErrorKind::kDimMismatch, "IDX rank mismatch in " + path.string());
    }
    throw IdxError(IdxErrorKind::kBadMagic, "bad IDX magic in " + path.string());
  }
  const std::size_t rank = magic & 0xFFu;
  IdxHeader header;
  header.payload_offset = 4 + 4 * rank;
  if (bytes.size() < header.payload_offset) {
    throw IdxError(IdxErrorKind::kTruncated, "IDX dimension block truncated: " + path.string());
  }
  for (std::size_t i = 0; i < rank; ++i) {
    header.dims.push_back(read_be32(bytes, 4 + 4 * i));
    if (header.dims.back() == 0) throw IdxError(IdxErrorKind::kDimMismatch, "zero IDX extent in " + path.string());
  }
  std::size_t payload = 1;
  for (auto d : header.dims) payload *= d;
  if (bytes.size() - header.payload_offset < payload) {
    throw IdxError(IdxErrorKind::kTruncated, "IDX payload truncated: " + path.string());
  }
  return header;
}

}  // namespace

ImageSet load_idx_images(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const auto header = parse_header(bytes, kIdxImageMagic, path);
  ImageSet out;
  const auto n = static_cast<Eigen::Index>(header.dims[0]);
  out.height = header.dims[1];
  out.width = header.dims[2];
  const auto pixels = static_cast<Eigen::Index>(out.height * out.width);
  out.pixels.resize(n, pixels);
  const unsigned char* src = bytes.data() + header.payload_offset;
  for (Eigen::Index i = 0; i < out.pixels.size(); ++i) out.pixels.data()[i] = src[i] / 255.0;
  return out;
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const auto header = parse_header(bytes, kIdxLabelMagic, path);
  const unsigned char* src = bytes.data() + header.payload_offset;
  return std::vector<int>(src, src + header.dims[0]);
}

LabeledImages load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  LabeledImages out{load_idx_images(images), load_idx_labels(labels)};
  if (out.images.size() != out.labels.size()) {
    throw IdxError(IdxErrorKind::kDimMismatch, "image count " + std::to_string(out.images.size()) +
                                                   " does not match label count " +
                                                   std::to_string(out.labels.size()));
  }
  return out;
}

void write_idx_images(const std::filesystem::path& path, const ImageSet& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError(IdxErrorKind::kIo, "cannot write " + path.string());
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(images.size()));
  put_be32(out, static_cast<std::uint32_t>(images.height));
  put_be32(out, static_cast<std::uint32_t>(images.width));
  for (Eigen::Index i = 0; i < images.pixels.size(); ++i) {
    const double v = std::clamp(images.pixels.data()[i], 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError(IdxErrorKind::kIo, "cannot write " + path.string());
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) out.put(static_cast<char>(static_cast<unsigned char>(l)));
}

ImageSet edge_view(const ImageSet& images) {
  const auto h = static_cast<long>(images.height);
  const auto w = static_cast<long>(images.width);
  if (h * w != images.pixels.cols()) throw std::invalid_argument("edge_view: pixel count does not match image size");
  ImageSet out{Matrix::Zero(images.pixels.rows(), images.pixels.cols()), images.height, images.width};
  auto at = [&](const double* img, long r, long c) {
    r = std::clamp(r, 0L, h - 1);
    c = std::clamp(c, 0L, w - 1);
    return img[r * w + c];
  };
  for (Eigen::Index n = 0; n < images.pixels.rows(); ++n) {
    const double* img = images.pixels.row(n).data();
    double* dst = out.pixels.row(n).data();
    double peak = 0.0;
    for (long r = 0; r < h; ++r) {
      for (long c = 0; c < w; ++c) {
        const double gx = (at(img, r - 1, c + 1) + 2 * at(img, r, c + 1) + at(img, r + 1, c + 1)) -
                          (at(img, r - 1, c - 1) + 2 * at(img, r, c - 1) + at(img, r + 1, c - 1));
        const double gy = (at(img, r + 1, c - 1) + 2 * at(img, r + 1, c) + at(img, r + 1, c + 1)) -
                          (at(img, r - 1, c - 1) + 2 * at(img, r - 1, c) + at(img, r - 1, c + 1));
        const double mag = std::sqrt(gx * gx + gy * gy);
        dst[r * w + c] = mag;
        peak = std::max(peak, mag);
      }
    }
    if (peak > 0.0) {
      for (long i = 0; i < h * w; ++i) dst[i] /= peak;
    }
  }
  return out;
}

MultiViewBatch make_edge_dataset(const LabeledImages& data, std::size_t subset, std::uint64_t seed) {
  std::vector<std::size_t> order(data.images.size());
  std::iota(order.begin(), order.end(), 0);
  if (subset > 0 && subset < order.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(subset);
    std::sort(order.begin(), order.end());
  }
  ImageSet picked{Matrix(static_cast<Eigen::Index>(order.size()), data.images.pixels.cols()), data.images.height,
                  data.images.width};
  MultiViewBatch batch;
  std::vector<int> labels;
  for (std::size_t i = 0; i < order.size(); ++i) {
    picked.pixels.row(static_cast<Eigen::Index>(i)) = data.images.pixels.row(static_cast<Eigen::Index>(order[i]));
    labels.push_back(data.labels[order[i]]);
    batch.ids.push_back(static_cast<std::int64_t>(order[i]));
  }
  ImageSet edges = edge_view(picked);
  batch.views.push_back(std::move(picked.pixels));
  batch.views.push_back(std::move(edges.pixels));
  batch.labels = std::move(labels);
  batch.validate();
  return batch;
}

}  // namespace mvd::datasets
