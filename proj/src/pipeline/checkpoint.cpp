#include "mvd/pipeline/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace mvd::pipeline {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::vector<char> bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  void take(void* out, std::size_t n) {
    if (n > bytes_.size() - pos_) throw CheckpointError(path_ + ": truncated checkpoint");
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod() {
    T v;
    take(&v, sizeof(T));
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > bytes_.size() - pos_) throw CheckpointError(path_ + ": truncated checkpoint");
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  Writer w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.pod(kCheckpointVersion);
  w.str(checkpoint.module);
  w.str(checkpoint.config_hash);
  w.str(checkpoint.rng_state);
  w.pod<std::uint64_t>(checkpoint.tensors.size());
  for (const auto& [name, m] : checkpoint.tensors) {
    w.str(name);
    w.pod<std::uint32_t>(2);
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    w.raw(reinterpret_cast<const char*>(m.data()), sizeof(double) * static_cast<std::size_t>(m.size()));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ByteReader r(std::move(bytes), path.string());
  char magic[sizeof kCheckpointMagic];
  r.take(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw CheckpointError(path.string() + ": bad magic");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.module = r.str();
  c.config_hash = r.str();
  c.rng_state = r.str();
  const auto count = r.pod<std::uint64_t>();
  for (std::uint64_t t = 0; t < count; ++t) {
    std::string name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    if (rank != 2) throw CheckpointError(path.string() + ": tensor " + name + " has unsupported rank");
    const auto rows = r.pod<std::uint64_t>();
    const auto cols = r.pod<std::uint64_t>();
    if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) {
      throw CheckpointError(path.string() + ": tensor " + name + " is implausibly large");
    }
    ndgrad::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    r.take(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    c.tensors.emplace_back(std::move(name), std::move(m));
  }
  if (!r.done()) throw CheckpointError(path.string() + ": trailing bytes after last tensor");
  return c;
}

std::vector<std::pair<std::string, ndgrad::Matrix>> snapshot(const ndgrad::NamedTensors& tensors) {
  std::vector<std::pair<std::string, ndgrad::Matrix>> out;
  out.reserve(tensors.size());
  for (const auto& [name, t] : tensors) out.emplace_back(name, t.value());
  return out;
}

void restore(const ndgrad::NamedTensors& target, const std::vector<std::pair<std::string, ndgrad::Matrix>>& values) {
  if (target.size() != values.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(values.size()) + " tensors, model has " +
                          std::to_string(target.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& [name, m] = values[i];
    auto t = target[i].second;
    if (target[i].first != name) throw CheckpointError("tensor name mismatch: " + target[i].first + " vs " + name);
    if (t.value().rows() != m.rows() || t.value().cols() != m.cols()) {
      throw CheckpointError("shape mismatch for tensor " + name);
    }
    t.mutable_value() = m;
  }
}

}  // namespace mvd::pipeline
