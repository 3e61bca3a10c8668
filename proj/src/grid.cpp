#include "fuzzymi/grid.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "fuzzymi/csv.hpp"

namespace fuzzymi {

Grid::Grid(int width, int height, std::vector<double> data, double range_min,
           double range_max, bool clamp_to_range)
    : width_(width),
      height_(height),
      data_(std::move(data)),
      range_min_(range_min),
      range_max_(range_max) {
  if (width_ <= 0 || height_ <= 0)
    throw std::invalid_argument("Grid: dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(width_) * height_)
    throw std::invalid_argument("Grid: data length must equal width*height");
  if (!(range_min_ < range_max_))
    throw std::invalid_argument("Grid: range_min must be below range_max");
  for (double& s : data_) {
    if (!std::isfinite(s)) throw std::invalid_argument("Grid: non-finite sample");
    if (s < range_min_ || s > range_max_) {
      if (!clamp_to_range)
        throw std::invalid_argument("Grid: sample outside declared range");
      s = s < range_min_ ? range_min_ : range_max_;
    }
  }
}

Grid Grid::constant(int width, int height, double value, double range_min,
                    double range_max) {
  return Grid(width, height,
              std::vector<double>(static_cast<std::size_t>(width) * height, value),
              range_min, range_max);
}

namespace {

// Reads one header token, skipping whitespace and '#' comments.
bool next_token(const std::string& buf, std::size_t& pos, std::string& token) {
  token.clear();
  while (pos < buf.size()) {
    const char c = buf[pos];
    if (c == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos])) &&
         buf[pos] != '#') {
    token.push_back(buf[pos]);
    ++pos;
  }
  return !token.empty();
}

long parse_header_int(const std::string& token) {
  if (token.empty()) throw PgmError(PgmErrorCode::bad_header, "pgm: missing header field");
  for (char c : token)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw PgmError(PgmErrorCode::bad_header, "pgm: non-numeric header field '" + token + "'");
  return std::stol(token);
}

}  // namespace

Grid load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw PgmError(PgmErrorCode::missing_file, "pgm: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  std::size_t pos = 0;
  std::string token;
  if (!next_token(buf, pos, token))
    throw PgmError(PgmErrorCode::bad_header, "pgm: empty file " + path.string());
  if (token != "P5")
    throw PgmError(PgmErrorCode::unsupported_format,
                   "pgm: magic '" + token + "' is not P5 in " + path.string());

  std::string wtok, htok, mtok;
  if (!next_token(buf, pos, wtok) || !next_token(buf, pos, htok) ||
      !next_token(buf, pos, mtok))
    throw PgmError(PgmErrorCode::bad_header, "pgm: incomplete header in " + path.string());
  const long w = parse_header_int(wtok);
  const long h = parse_header_int(htok);
  const long maxval = parse_header_int(mtok);
  if (w <= 0 || h <= 0)
    throw PgmError(PgmErrorCode::bad_header, "pgm: non-positive dimensions");
  if (maxval != 255)
    throw PgmError(PgmErrorCode::unsupported_maxval,
                   "pgm: maxval " + std::to_string(maxval) + " unsupported (need 255)");

  // Exactly one whitespace byte separates maxval from the payload.
  if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos])))
    throw PgmError(PgmErrorCode::bad_header, "pgm: missing payload separator");
  ++pos;

  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (buf.size() - pos < need)
    throw PgmError(PgmErrorCode::truncated,
                   "pgm: payload has " + std::to_string(buf.size() - pos) +
                       " bytes, need " + std::to_string(need));

  std::vector<double> data(need);
  for (std::size_t i = 0; i < need; ++i)
    data[i] = static_cast<double>(static_cast<std::uint8_t>(buf[pos + i]));
  return Grid(static_cast<int>(w), static_cast<int>(h), std::move(data), 0.0, 255.0);
}

void save_pgm(const Grid& grid, const std::filesystem::path& path) {
  if (grid.range_min() != 0.0 || grid.range_max() != 255.0)
    throw PgmError(PgmErrorCode::range_not_byte, "pgm: grid range must be [0,255]");
  std::string out;
  out.reserve(grid.size() + 32);
  out += "P5\n" + std::to_string(grid.width()) + " " +
         std::to_string(grid.height()) + "\n255\n";
  for (double s : grid.samples()) {
    double b = std::floor(s + 0.5);  // half-up
    if (b < 0.0) b = 0.0;
    if (b > 255.0) b = 255.0;
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(b)));
  }
  try {
    csv::atomic_write(path, out);
  } catch (const std::exception& e) {
    throw PgmError(PgmErrorCode::unwritable, e.what());
  }
}

}  // namespace fuzzymi
