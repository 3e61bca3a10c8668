// grid.hpp - immutable 2-D sample container with dynamic-range metadata,
// plus binary PGM (P5, maxval 255) I/O.

#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fuzzymi {

enum class PgmErrorCode {
  missing_file,
  unsupported_format,  // magic is not "P5"
  bad_header,
  unsupported_maxval,  // maxval != 255
  truncated,
  non_finite,
  range_not_byte,  // save requires range [0,255]
  unwritable,
};

class PgmError : public std::runtime_error {
 public:
  PgmError(PgmErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  PgmErrorCode code() const noexcept { return code_; }

 private:
  PgmErrorCode code_;
};

// Width x height row-major samples, every sample within [range_min, range_max].
// Instances are immutable; transforms build new Grids.
class Grid {
 public:
  // With clamp_to_range, out-of-range samples are clamped on construction;
  // otherwise they are an error. Non-finite samples are always an error.
  Grid(int width, int height, std::vector<double> data,
       double range_min = 0.0, double range_max = 255.0,
       bool clamp_to_range = false);

  static Grid constant(int width, int height, double value,
                       double range_min = 0.0, double range_max = 255.0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  double range_min() const noexcept { return range_min_; }
  double range_max() const noexcept { return range_max_; }
  double range_span() const noexcept { return range_max_ - range_min_; }
  std::span<const double> samples() const noexcept { return data_; }
  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  bool same_shape(const Grid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool same_range(const Grid& other) const noexcept {
    return range_min_ == other.range_min_ && range_max_ == other.range_max_;
  }

 private:
  int width_;
  int height_;
  std::vector<double> data_;
  double range_min_;
  double range_max_;
};

// Binary PGM, magic P5, maxval 255. Loaded grids get range [0,255].
Grid load_pgm(const std::filesystem::path& path);

// Rounds samples half-up to bytes. Requires range [0,255]. Atomic write.
void save_pgm(const Grid& grid, const std::filesystem::path& path);

}  // namespace fuzzymi
