#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gmmn/linalg.hpp"

namespace gmmn {

struct ImageShape {
  Index height = 0;
  Index width = 0;

  Index pixels() const { return height * width; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// Whole file contents. Paths ending in ".gz" are decompressed.
std::string read_file_bytes(const std::filesystem::path& path);

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);

// --- IDX ---------------------------------------------------------------------
//
// Images: big-endian u32 magic 0x00000803, count, rows, cols, then
// count*rows*cols unsigned bytes. Labels: magic 0x00000801, count, then count
// bytes.

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct IdxImages {
  MatrixXd pixels; ///< count x (rows*cols), scaled by 1/255
  ImageShape shape;
};

IdxImages parse_idx_images(const std::string& bytes);
std::vector<std::uint8_t> parse_idx_labels(const std::string& bytes);

IdxImages load_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path);

struct LabeledImages {
  IdxImages images;
  std::optional<std::vector<std::uint8_t>> labels;
};

/// Images plus optional labels; the label count must equal the image count.
LabeledImages load_idx(const std::filesystem::path& images_path,
                       const std::optional<std::filesystem::path>& labels_path = std::nullopt);

/// Pixel values are clamped to [0, 1] and rounded half-up to bytes.
std::string encode_idx_images(const MatrixXd& pixels, ImageShape shape);
void save_idx_images(const std::filesystem::path& path, const MatrixXd& pixels, ImageShape shape);

// --- datasets ----------------------------------------------------------------

struct Dataset {
  MatrixXd train;
  MatrixXd valid;
  MatrixXd test;
  std::optional<ImageShape> image_shape;
};

/// Seeded shuffle, then the last n_valid rows become the validation split.
Dataset split_train_valid(const MatrixXd& images, Index n_valid, std::uint64_t seed);

/// The standard MNIST protocol: 60000 training images -> 55000 train / 5000 valid.
Dataset mnist_splits(const MatrixXd& train_images, std::uint64_t seed);

/// n draws; each picks a component (row of means) uniformly, then adds
/// isotropic Gaussian noise with that component's std.
MatrixXd synth_gaussian_mixture(Rng& rng, Index n, const MatrixXd& means, const std::vector<double>& stds);

// --- images ------------------------------------------------------------------

struct GrayImage {
  Index width = 0;
  Index height = 0;
  std::vector<std::uint8_t> pixels; ///< row-major
};

/// Tiles sample rows (each an image of `shape`) into a grid with grid_cols
/// columns and 1-pixel black separators; [0,1] maps to [0,255], half-up.
GrayImage render_grid(const MatrixXd& samples, ImageShape shape, Index grid_cols);

/// Binary PGM (P5, maxval 255).
std::string encode_pgm(const GrayImage& image);

void emit_grid(const MatrixXd& samples, ImageShape shape, Index grid_cols, const std::filesystem::path& path);

// --- raw matrices --------------------------------------------------------------
//
// "GMMNMAT1", u64 rows, u64 cols, rows*cols little-endian f64 (row-major).

std::string encode_matrix(const MatrixXd& m);
MatrixXd decode_matrix(const std::string& bytes);
void save_matrix(const std::filesystem::path& path, const MatrixXd& m);
MatrixXd load_matrix(const std::filesystem::path& path);

} // namespace gmmn
