#include "gmmn/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <zlib.h>

#include "byte_io.hpp"
#include "gmmn/training.hpp"

namespace gmmn {

namespace {

bool has_gz_suffix(const std::filesystem::path& p) {
  return p.extension() == ".gz";
}

std::string read_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw DataError(DataErrorCode::io, "cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) out.append(buf, static_cast<std::size_t>(n));
  int err = Z_OK;
  const char* msg = gzerror(f, &err);
  const bool failed = n < 0 || (err != Z_OK && err != Z_STREAM_END);
  const std::string what = failed ? std::string(msg) : std::string();
  gzclose(f);
  if (failed) throw DataError(DataErrorCode::truncated, "corrupt gzip stream in " + path.string() + ": " + what);
  return out;
}

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

} // namespace

std::string read_file_bytes(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError(DataErrorCode::io, "file not found: " + path.string());
  if (has_gz_suffix(path)) return read_gzip(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrorCode::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(DataErrorCode::io, "write failed for " + path.string());
}

IdxImages parse_idx_images(const std::string& bytes) {
  detail::ByteReader r(bytes, DataErrorCode::truncated, "IDX images");
  const std::uint32_t magic = r.u32be();
  if (magic != kIdxImageMagic) {
    std::ostringstream msg;
    msg << "IDX images: bad magic 0x" << std::hex << magic << " (expected 0x" << kIdxImageMagic << ")";
    throw DataError(DataErrorCode::bad_magic, msg.str());
  }
  const std::uint64_t count = r.u32be();
  const std::uint64_t rows = r.u32be();
  const std::uint64_t cols = r.u32be();

  // Bound every product so the pixel count fits comfortably in an Index.
  constexpr std::uint64_t limit = std::uint64_t{1} << 40;
  const std::uint64_t per_image = rows * cols; // both < 2^32, cannot wrap
  if (per_image > limit || (per_image != 0 && count > limit / per_image)) {
    throw DataError(DataErrorCode::dimension_overflow, "IDX images: header declares " + std::to_string(count) +
                                                           " x " + std::to_string(rows) + " x " +
                                                           std::to_string(cols) + " pixels, too large");
  }
  const std::uint64_t total = count * per_image;
  const std::string_view pix = r.bytes(static_cast<std::size_t>(total));
  if (r.remaining() != 0) {
    throw DataError(DataErrorCode::corrupt_length, "IDX images: " + std::to_string(r.remaining()) +
                                                       " trailing bytes after the declared pixels");
  }

  IdxImages out;
  out.shape = {static_cast<Index>(rows), static_cast<Index>(cols)};
  out.pixels.resize(static_cast<Index>(count), static_cast<Index>(per_image));
  for (std::size_t i = 0; i < pix.size(); ++i) {
    out.pixels.data()[i] = static_cast<double>(static_cast<std::uint8_t>(pix[i])) / 255.0;
  }
  return out;
}

std::vector<std::uint8_t> parse_idx_labels(const std::string& bytes) {
  detail::ByteReader r(bytes, DataErrorCode::truncated, "IDX labels");
  const std::uint32_t magic = r.u32be();
  if (magic != kIdxLabelMagic) {
    std::ostringstream msg;
    msg << "IDX labels: bad magic 0x" << std::hex << magic << " (expected 0x" << kIdxLabelMagic << ")";
    throw DataError(DataErrorCode::bad_magic, msg.str());
  }
  const std::uint32_t count = r.u32be();
  const std::string_view v = r.bytes(count);
  if (r.remaining() != 0) throw DataError(DataErrorCode::corrupt_length, "IDX labels: trailing bytes");
  return {v.begin(), v.end()};
}

IdxImages load_idx_images(const std::filesystem::path& path) {
  try {
    return parse_idx_images(read_file_bytes(path));
  } catch (const DataError& e) {
    if (e.code() == DataErrorCode::io) throw;
    throw DataError(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path) {
  try {
    return parse_idx_labels(read_file_bytes(path));
  } catch (const DataError& e) {
    if (e.code() == DataErrorCode::io) throw;
    throw DataError(e.code(), path.string() + ": " + e.what());
  }
}

LabeledImages load_idx(const std::filesystem::path& images_path,
                       const std::optional<std::filesystem::path>& labels_path) {
  LabeledImages out{load_idx_images(images_path), std::nullopt};
  if (labels_path) {
    out.labels = load_idx_labels(*labels_path);
    if (static_cast<Index>(out.labels->size()) != out.images.pixels.rows()) {
      throw DataError(DataErrorCode::row_count, "IDX: " + std::to_string(out.labels->size()) + " labels for " +
                                                    std::to_string(out.images.pixels.rows()) + " images");
    }
  }
  return out;
}

std::string encode_idx_images(const MatrixXd& pixels, ImageShape shape) {
  if (pixels.cols() != shape.pixels()) {
    throw ShapeError("encode_idx_images: " + shape_string(pixels) + " rows do not hold " +
                     std::to_string(shape.height) + "x" + std::to_string(shape.width) + " images");
  }
  detail::ByteWriter w;
  w.u32be(kIdxImageMagic);
  w.u32be(static_cast<std::uint32_t>(pixels.rows()));
  w.u32be(static_cast<std::uint32_t>(shape.height));
  w.u32be(static_cast<std::uint32_t>(shape.width));
  for (Index i = 0; i < pixels.size(); ++i) w.byte(to_byte(pixels.data()[i]));
  return w.take();
}

void save_idx_images(const std::filesystem::path& path, const MatrixXd& pixels, ImageShape shape) {
  write_file_bytes(path, encode_idx_images(pixels, shape));
}

Dataset split_train_valid(const MatrixXd& images, Index n_valid, std::uint64_t seed) {
  if (n_valid < 0 || n_valid >= images.rows()) {
    throw ConfigError("split: cannot hold out " + std::to_string(n_valid) + " of " +
                      std::to_string(images.rows()) + " rows");
  }
  Rng rng = Rng(seed).substream("split");
  const auto order = rng.permutation(images.rows());
  const Index n_train = images.rows() - n_valid;
  Dataset out;
  out.train = gather_rows(images, std::span<const Index>(order).first(static_cast<std::size_t>(n_train)));
  out.valid = gather_rows(images, std::span<const Index>(order).subspan(static_cast<std::size_t>(n_train)));
  return out;
}

Dataset mnist_splits(const MatrixXd& train_images, std::uint64_t seed) {
  constexpr Index kTrainRows = 60000;
  constexpr Index kValidRows = 5000;
  if (train_images.rows() != kTrainRows) {
    throw DataError(DataErrorCode::row_count, "mnist_splits: expected 60000 training images, got " +
                                                  std::to_string(train_images.rows()));
  }
  Dataset out = split_train_valid(train_images, kValidRows, seed);
  if (train_images.cols() == 784) out.image_shape = ImageShape{28, 28};
  return out;
}

MatrixXd synth_gaussian_mixture(Rng& rng, Index n, const MatrixXd& means, const std::vector<double>& stds) {
  if (means.rows() == 0) throw ConfigError("synth_gaussian_mixture: no components");
  if (static_cast<Index>(stds.size()) != means.rows()) {
    throw ConfigError("synth_gaussian_mixture: " + std::to_string(stds.size()) + " stds for " +
                      std::to_string(means.rows()) + " components");
  }
  for (double s : stds) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("synth_gaussian_mixture: stds must be >= 0");
  }
  if (n < 0) throw ConfigError("synth_gaussian_mixture: negative count");
  MatrixXd out(n, means.cols());
  for (Index i = 0; i < n; ++i) {
    const auto c = static_cast<Index>(rng.below(static_cast<std::uint64_t>(means.rows())));
    for (Index p = 0; p < means.cols(); ++p) {
      out(i, p) = means(c, p) + stds[static_cast<std::size_t>(c)] * rng.normal();
    }
  }
  return out;
}

GrayImage render_grid(const MatrixXd& samples, ImageShape shape, Index grid_cols) {
  if (shape.height < 1 || shape.width < 1) throw ConfigError("render_grid: image shape must be positive");
  if (samples.cols() != shape.pixels()) {
    throw ShapeError("render_grid: samples " + shape_string(samples) + " are not " + std::to_string(shape.height) +
                     "x" + std::to_string(shape.width) + " images");
  }
  if (samples.rows() < 1) throw ConfigError("render_grid: no samples");
  if (grid_cols < 1) throw ConfigError("render_grid: grid_cols must be positive");

  const Index cols = std::min(grid_cols, samples.rows());
  const Index rows = (samples.rows() + cols - 1) / cols;
  GrayImage img;
  img.width = cols * shape.width + (cols - 1);
  img.height = rows * shape.height + (rows - 1);
  img.pixels.assign(static_cast<std::size_t>(img.width * img.height), 0);
  for (Index s = 0; s < samples.rows(); ++s) {
    const Index top = (s / cols) * (shape.height + 1);
    const Index left = (s % cols) * (shape.width + 1);
    for (Index y = 0; y < shape.height; ++y) {
      for (Index x = 0; x < shape.width; ++x) {
        img.pixels[static_cast<std::size_t>((top + y) * img.width + left + x)] =
            to_byte(samples(s, y * shape.width + x));
      }
    }
  }
  return img;
}

std::string encode_pgm(const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  return out;
}

void emit_grid(const MatrixXd& samples, ImageShape shape, Index grid_cols, const std::filesystem::path& path) {
  write_file_bytes(path, encode_pgm(render_grid(samples, shape, grid_cols)));
}

namespace {
constexpr std::string_view kMatrixMagic = "GMMNMAT1";
}

std::string encode_matrix(const MatrixXd& m) {
  detail::ByteWriter w;
  w.bytes(kMatrixMagic);
  w.u64le(static_cast<std::uint64_t>(m.rows()));
  w.u64le(static_cast<std::uint64_t>(m.cols()));
  for (Index i = 0; i < m.size(); ++i) w.f64le(m.data()[i]);
  return w.take();
}

MatrixXd decode_matrix(const std::string& bytes) {
  detail::ByteReader r(bytes, DataErrorCode::corrupt_length, "matrix file");
  if (r.bytes(kMatrixMagic.size()) != kMatrixMagic) throw DataError(DataErrorCode::bad_magic, "matrix file: bad magic");
  const std::uint64_t rows = r.u64le();
  const std::uint64_t cols = r.u64le();
  if (cols != 0 && rows > (r.remaining() / 8) / cols) {
    throw DataError(DataErrorCode::corrupt_length, "matrix file: header declares more values than present");
  }
  MatrixXd m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64le();
  if (r.remaining() != 0) throw DataError(DataErrorCode::corrupt_length, "matrix file: trailing bytes");
  return m;
}

void save_matrix(const std::filesystem::path& path, const MatrixXd& m) {
  write_file_bytes(path, encode_matrix(m));
}

MatrixXd load_matrix(const std::filesystem::path& path) {
  return decode_matrix(read_file_bytes(path));
}

} // namespace gmmn
