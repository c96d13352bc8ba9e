#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nonsing/dataset.hpp"
#include "nonsing/errors.hpp"

namespace nonsing {

/// Raised for malformed IDX files; `kind` says which check failed.
class IdxError : public FormatError {
 public:
  enum class Kind { wrong_magic, truncated, dimension_mismatch, label_range, count_mismatch, io };

  IdxError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::uint32_t kMnistSide = 28;

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major per image
};

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes,
                                           const std::string& source = "<memory>");

IdxImages load_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path);

/// Pixels scaled by 1/255 into [0, 1], one example per column.
Dataset to_dataset(const IdxImages& images, const std::vector<std::uint8_t>& labels, Split split);

struct MnistFiles {
  std::filesystem::path images;
  std::filesystem::path labels;
};

/// Canonical file names inside `dir` (train-images-idx3-ubyte, ...).
MnistFiles mnist_files(const std::filesystem::path& dir, Split split);

Dataset load_mnist(const std::filesystem::path& dir, Split split);

/// $MNIST_DIR, or empty when unset.
std::filesystem::path mnist_dir_from_env();

}  // namespace nonsing
