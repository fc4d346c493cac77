#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tep/core.hpp"

namespace tep::data {

class FormatError : public InputError {
 public:
  using InputError::InputError;
};

enum class Split { Train, Test };

struct Dataset {
  std::vector<double> inputs;  // row-major, size() × dim
  std::vector<std::size_t> labels;
  std::size_t dim = 0;
  std::size_t n_classes = 0;
  Split split = Split::Train;

  std::size_t size() const { return labels.size(); }
  std::span<const double> input(std::size_t i) const {
    return std::span<const double>(inputs).subspan(i * dim, dim);
  }
  // Throws InputError if the invariants do not hold.
  void validate() const;
  // First `count` examples.
  Dataset head(std::size_t count) const;
  // FNV-1a over labels and the raw input bytes.
  std::uint64_t checksum() const;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Reads an IDX image/label pair (big-endian headers), scaling pixels by 1/255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<std::size_t> limit = std::nullopt, Split split = Split::Train,
                 std::size_t n_classes = 10);

/// Writes 8-bit IDX files; pixels must be integers in [0, 255].
void write_idx_images(const std::string& path, std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels);
void write_idx_labels(const std::string& path, std::span<const std::uint8_t> labels);

/// Gaussian clusters around regular-simplex vertices (unit distance from the
/// centroid) embedded in the first n_classes − 1 coordinates.
Dataset make_blobs(std::size_t n_classes, std::size_t n_per_class, std::size_t dim, double spread,
                   std::uint64_t seed);

}  // namespace tep::data
