#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tep/data.hpp"

using namespace tep;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("tep_data_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(Idx, RoundTrip) {
  TempDir dir;
  std::vector<std::uint8_t> pixels{0, 255, 51, 102, 0, 0, 10, 20, 30, 40, 50, 60};
  std::vector<std::uint8_t> labels{3, 1, 7};
  data::write_idx_images(dir.file("img"), 2, 2, pixels);
  data::write_idx_labels(dir.file("lab"), labels);
  const auto ds = data::load_idx(dir.file("img"), dir.file("lab"));
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.dim, 4u);
  EXPECT_EQ(ds.labels, (std::vector<std::size_t>{3, 1, 7}));
  EXPECT_DOUBLE_EQ(ds.input(0)[1], 1.0);
  EXPECT_DOUBLE_EQ(ds.input(0)[2], 0.2);
  const auto two = data::load_idx(dir.file("img"), dir.file("lab"), 2);
  EXPECT_EQ(two.size(), 2u);
  EXPECT_EQ(two.checksum(), ds.head(2).checksum());
}

TEST(Idx, BadMagic) {
  TempDir dir;
  data::write_idx_labels(dir.file("lab"), std::vector<std::uint8_t>{1});
  write_bytes(dir.file("img"), {0, 0, 8, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 9});
  EXPECT_THROW(data::load_idx(dir.file("img"), dir.file("lab")), data::FormatError);
  // Swapped roles.
  data::write_idx_images(dir.file("img2"), 1, 1, std::vector<std::uint8_t>{9});
  EXPECT_THROW(data::load_idx(dir.file("lab"), dir.file("img2")), data::FormatError);
}

TEST(Idx, TruncatedData) {
  TempDir dir;
  data::write_idx_labels(dir.file("lab"), std::vector<std::uint8_t>{1, 2});
  write_bytes(dir.file("img"), {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3});
  EXPECT_THROW(data::load_idx(dir.file("img"), dir.file("lab")), data::FormatError);
  write_bytes(dir.file("short"), {0, 0, 8});
  EXPECT_THROW(data::load_idx(dir.file("short"), dir.file("lab")), data::FormatError);
}

TEST(Idx, CountMismatch) {
  TempDir dir;
  data::write_idx_images(dir.file("img"), 1, 2, std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6});
  data::write_idx_labels(dir.file("lab"), std::vector<std::uint8_t>{1, 2});
  EXPECT_THROW(data::load_idx(dir.file("img"), dir.file("lab")), data::FormatError);
}

TEST(Idx, LimitZeroAndMissingFile) {
  TempDir dir;
  data::write_idx_images(dir.file("img"), 1, 1, std::vector<std::uint8_t>{1});
  data::write_idx_labels(dir.file("lab"), std::vector<std::uint8_t>{1});
  EXPECT_THROW(data::load_idx(dir.file("img"), dir.file("lab"), 0), InputError);
  EXPECT_THROW(data::load_idx(dir.file("nope"), dir.file("lab")), InputError);
}

TEST(Idx, LabelOutOfRange) {
  TempDir dir;
  data::write_idx_images(dir.file("img"), 1, 1, std::vector<std::uint8_t>{1});
  data::write_idx_labels(dir.file("lab"), std::vector<std::uint8_t>{12});
  EXPECT_THROW(data::load_idx(dir.file("img"), dir.file("lab")), InputError);
}

TEST(Blobs, ShapeAndDeterminism) {
  const auto a = data::make_blobs(3, 10, 5, 0.25, 42);
  EXPECT_EQ(a.size(), 30u);
  EXPECT_EQ(a.dim, 5u);
  EXPECT_EQ(a.n_classes, 3u);
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.checksum(), data::make_blobs(3, 10, 5, 0.25, 42).checksum());
  EXPECT_NE(a.checksum(), data::make_blobs(3, 10, 5, 0.25, 43).checksum());
}

TEST(Blobs, GoldenChecksum) {
  // Guards the generator and the seed derivation against silent changes.
  EXPECT_EQ(data::make_blobs(3, 100, 8, 0.25, 1).checksum(), 0xf430fd33ae7d97abULL);
}

TEST(Blobs, ZeroSpreadSitsOnSimplexVertices) {
  const auto ds = data::make_blobs(4, 2, 3, 0.0, 7);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double r = 0.0;
    for (double v : ds.input(i)) r += v * v;
    EXPECT_NEAR(std::sqrt(r), 1.0, 1e-12);
  }
}

TEST(Blobs, RejectsBadArguments) {
  EXPECT_THROW(data::make_blobs(1, 10, 5, 0.1, 1), InputError);
  EXPECT_THROW(data::make_blobs(5, 10, 3, 0.1, 1), InputError);
  EXPECT_THROW(data::make_blobs(3, 0, 5, 0.1, 1), InputError);
  EXPECT_THROW(data::make_blobs(3, 10, 5, -0.1, 1), InputError);
}

TEST(Dataset, ValidateCatchesInconsistency) {
  auto ds = data::make_blobs(3, 2, 4, 0.1, 1);
  ds.labels.push_back(0);
  EXPECT_THROW(ds.validate(), InputError);
}
