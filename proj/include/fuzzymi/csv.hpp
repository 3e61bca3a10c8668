// csv.hpp - small CSV helpers: numeric matrices, generic rows, atomic writes.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fuzzymi::csv {

// Writes content to path via a temp file + rename.
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::string format_value(double v);  // shortest round-trip-safe form

// Row-major matrix, comma-separated columns, '\n' rows, no header unless
// column names are given.
std::string matrix_to_csv(std::span<const double> values, int rows, int cols,
                          std::span<const std::string> column_names = {});
void write_matrix(const std::filesystem::path& path, std::span<const double> values,
                  int rows, int cols, std::span<const std::string> column_names = {});

// Minimal reader: splits on commas, drops blank lines, keeps '#' lines out.
std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path);

}  // namespace fuzzymi::csv
