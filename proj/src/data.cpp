#include "tep/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include "tep/rng.hpp"

namespace tep::data {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::string& path) {
  if (bytes.size() < offset + 4) throw FormatError("'" + path + "': truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

void Dataset::validate() const {
  if (labels.empty()) throw InputError("dataset is empty");
  if (dim == 0) throw InputError("dataset has zero input dimension");
  if (inputs.size() != labels.size() * dim) throw InputError("dataset inputs and labels disagree in count");
  for (std::size_t y : labels) {
    if (y >= n_classes) throw InputError("dataset label " + std::to_string(y) + " out of range");
  }
}

Dataset Dataset::head(std::size_t count) const {
  Dataset d = *this;
  count = std::min(count, size());
  d.labels.resize(count);
  d.inputs.resize(count * dim);
  return d;
}

std::uint64_t Dataset::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t y : labels) {
    const std::uint64_t v = y;
    mix(&v, sizeof v);
  }
  mix(inputs.data(), inputs.size() * sizeof(double));
  return h;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<std::size_t> limit, Split split, std::size_t n_classes) {
  if (limit && *limit == 0) throw InputError("load_idx: limit 0 would produce an empty dataset");
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);

  if (read_be32(img, 0, images_path) != kIdxImagesMagic) {
    throw FormatError("'" + images_path + "': bad magic number for an IDX image file");
  }
  if (read_be32(lab, 0, labels_path) != kIdxLabelsMagic) {
    throw FormatError("'" + labels_path + "': bad magic number for an IDX label file");
  }
  const std::size_t n_images = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t n_labels = read_be32(lab, 4, labels_path);
  if (n_images != n_labels) {
    throw FormatError("IDX pairing error: " + std::to_string(n_images) + " images vs " +
                      std::to_string(n_labels) + " labels");
  }
  const std::size_t dim = rows * cols;
  if (img.size() < 16 + n_images * dim) throw FormatError("'" + images_path + "': truncated pixel data");
  if (lab.size() < 8 + n_labels) throw FormatError("'" + labels_path + "': truncated label data");

  const std::size_t count = limit ? std::min(*limit, n_images) : n_images;
  Dataset d;
  d.dim = dim;
  d.n_classes = n_classes;
  d.split = split;
  d.inputs.resize(count * dim);
  d.labels.resize(count);
  for (std::size_t i = 0; i < count * dim; ++i) d.inputs[i] = static_cast<double>(img[16 + i]) / 255.0;
  for (std::size_t i = 0; i < count; ++i) d.labels[i] = lab[8 + i];
  d.validate();
  return d;
}

void write_idx_images(const std::string& path, std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels) {
  const std::size_t dim = rows * cols;
  if (dim == 0 || pixels.size() % dim != 0) throw InputError("write_idx_images: ragged pixel buffer");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(pixels.size() / dim));
  put_be32(out, static_cast<std::uint32_t>(rows));
  put_be32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::string& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Dataset make_blobs(std::size_t n_classes, std::size_t n_per_class, std::size_t dim, double spread,
                   std::uint64_t seed) {
  if (n_classes < 2) throw InputError("make_blobs: need at least 2 classes");
  if (dim + 1 < n_classes) throw InputError("make_blobs: dim must be at least n_classes - 1");
  if (n_per_class == 0) throw InputError("make_blobs: n_per_class must be positive");
  if (!(spread >= 0.0)) throw InputError("make_blobs: spread must be nonnegative");

  // Centred one-hot vectors e_c − 1/K span a (K−1)-dim subspace; express them in
  // an orthonormal basis of it (Gram–Schmidt) to get a regular simplex.
  const std::size_t k = n_classes;
  std::vector<std::vector<double>> basis;
  for (std::size_t c = 0; c + 1 < k; ++c) {
    std::vector<double> v(k, -1.0 / static_cast<double>(k));
    v[c] += 1.0;
    for (const auto& b : basis) {
      double proj = 0.0;
      for (std::size_t i = 0; i < k; ++i) proj += v[i] * b[i];
      for (std::size_t i = 0; i < k; ++i) v[i] -= proj * b[i];
    }
    double nrm = 0.0;
    for (double x : v) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (double& x : v) x /= nrm;
    basis.push_back(std::move(v));
  }
  const double radius = std::sqrt(static_cast<double>(k - 1) / static_cast<double>(k));
  std::vector<std::vector<double>> centers(k, std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < k; ++c) {
    // ⟨e_c − 1/K, b_a⟩ = b_a[c] because every b_a is orthogonal to the all-ones vector.
    for (std::size_t a = 0; a + 1 < k; ++a) centers[c][a] = basis[a][c] / radius;
  }

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d;
  d.dim = dim;
  d.n_classes = k;
  d.split = Split::Train;
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < dim; ++j) d.inputs.push_back(centers[c][j] + spread * normal(rng));
      d.labels.push_back(c);
    }
  }
  d.validate();
  return d;
}

}  // namespace tep::data
