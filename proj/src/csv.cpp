#include "fuzzymi/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fuzzymi::csv {

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename into " + path.string() + ": " + ec.message());
  }
}

std::string format_value(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string matrix_to_csv(std::span<const double> values, int rows, int cols,
                          std::span<const std::string> column_names) {
  if (rows < 0 || cols < 0 ||
      values.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("matrix_to_csv: shape mismatch");
  std::string out;
  if (!column_names.empty()) {
    for (std::size_t c = 0; c < column_names.size(); ++c) {
      if (c) out += ',';
      out += column_names[c];
    }
    out += '\n';
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c) out += ',';
      out += format_value(values[static_cast<std::size_t>(r) * cols + c]);
    }
    out += '\n';
  }
  return out;
}

void write_matrix(const std::filesystem::path& path, std::span<const double> values,
                  int rows, int cols, std::span<const std::string> column_names) {
  atomic_write(path, matrix_to_csv(values, rows, cols, column_names));
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace fuzzymi::csv
