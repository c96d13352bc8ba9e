#include "nonsing/mnist.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

namespace nonsing {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

void require_header(std::span<const std::uint8_t> bytes, std::size_t header, const std::string& source) {
  if (bytes.size() < header) {
    throw IdxError(IdxError::Kind::truncated, source + ": truncated header (" + std::to_string(bytes.size()) +
                                                  " bytes, need " + std::to_string(header) + ")");
  }
}

void require_magic(std::span<const std::uint8_t> bytes, std::uint32_t expected, const std::string& source) {
  const std::uint32_t found = read_be32(bytes, 0);
  if (found != expected) {
    throw IdxError(IdxError::Kind::wrong_magic,
                   source + ": wrong magic number, expected " + hex(expected) + ", found " + hex(found));
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& source) {
  require_header(bytes, 16, source);
  require_magic(bytes, kIdxImageMagic, source);
  IdxImages out;
  out.count = read_be32(bytes, 4);
  out.rows = read_be32(bytes, 8);
  out.cols = read_be32(bytes, 12);
  if (out.rows != kMnistSide) {
    throw IdxError(IdxError::Kind::dimension_mismatch,
                   source + ": rows expected " + std::to_string(kMnistSide) + ", found " + std::to_string(out.rows));
  }
  if (out.cols != kMnistSide) {
    throw IdxError(IdxError::Kind::dimension_mismatch,
                   source + ": cols expected " + std::to_string(kMnistSide) + ", found " + std::to_string(out.cols));
  }
  const std::size_t need = std::size_t{out.count} * out.rows * out.cols;
  if (bytes.size() - 16 < need) {
    throw IdxError(IdxError::Kind::truncated, source + ": truncated pixel data, count " + std::to_string(out.count) +
                                                  " needs " + std::to_string(need) + " bytes, found " +
                                                  std::to_string(bytes.size() - 16));
  }
  out.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return out;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes, const std::string& source) {
  require_header(bytes, 8, source);
  require_magic(bytes, kIdxLabelMagic, source);
  const std::uint32_t count = read_be32(bytes, 4);
  if (bytes.size() - 8 < count) {
    throw IdxError(IdxError::Kind::truncated, source + ": truncated label data, count " + std::to_string(count) +
                                                  ", found " + std::to_string(bytes.size() - 8));
  }
  std::vector<std::uint8_t> labels(bytes.begin() + 8, bytes.begin() + 8 + count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 9) {
      throw IdxError(IdxError::Kind::label_range, source + ": label " + std::to_string(labels[i]) + " at index " +
                                                      std::to_string(i) + " exceeds 9");
    }
  }
  return labels;
}

IdxImages load_idx_images(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_idx_images(bytes, path.string());
}

std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_idx_labels(bytes, path.string());
}

Dataset to_dataset(const IdxImages& images, const std::vector<std::uint8_t>& labels, Split split) {
  if (images.count != labels.size()) {
    throw IdxError(IdxError::Kind::count_mismatch, "image count " + std::to_string(images.count) +
                                                       " does not match label count " + std::to_string(labels.size()));
  }
  if (images.count == 0) throw IdxError(IdxError::Kind::count_mismatch, "dataset is empty");
  const Eigen::Index dim = static_cast<Eigen::Index>(images.rows) * images.cols;
  Dataset out;
  out.split = split;
  out.inputs.resize(dim, images.count);
  const Eigen::Map<const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>> raw(images.pixels.data(), dim,
                                                                                          images.count);
  out.inputs = raw.cast<double>() / 255.0;
  out.labels.assign(labels.begin(), labels.end());
  return out;
}

MnistFiles mnist_files(const std::filesystem::path& dir, Split split) {
  if (split == Split::train) return {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte"};
  return {dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte"};
}

Dataset load_mnist(const std::filesystem::path& dir, Split split) {
  const auto files = mnist_files(dir, split);
  return to_dataset(load_idx_images(files.images), load_idx_labels(files.labels), split);
}

std::filesystem::path mnist_dir_from_env() {
  const char* dir = std::getenv("MNIST_DIR");
  return dir ? std::filesystem::path(dir) : std::filesystem::path();
}

}  // namespace nonsing
