#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geoecon {

// Strict reader for the formats this project defines: UTF-8, one header row,
// comma separator, '.' decimal point, no quoting. Error messages carry
// 1-based line numbers and column names.
class CsvFile {
public:
  static CsvFile load(const std::string& path);

  const std::vector<std::string>& header() const { return header_; }
  size_t n_rows() const { return n_rows_; }
  size_t n_cols() const { return header_.size(); }

  std::span<const std::string_view> row(size_t r) const {
    return {fields_.data() + r * n_cols(), n_cols()};
  }
  // file line holding data row r
  size_t line_number(size_t r) const { return r + 2; }

  size_t column(const std::string& name) const;  // throws if absent
  std::optional<size_t> find_column(const std::string& name) const;

private:
  std::string text_;
  std::vector<std::string> header_;
  std::vector<std::string_view> fields_;
  size_t n_rows_ = 0;
};

// numeric field parsing with location-bearing errors; empty fields are only
// legal when allow_empty is set (returned as quiet NaN)
double parse_double_field(std::string_view field, size_t line,
                          const std::string& col, bool allow_empty = false);
int64_t parse_int_field(std::string_view field, size_t line,
                        const std::string& col);

// shortest round-trip formatting (std::to_chars)
std::string format_double(double v);

class CsvWriter {
public:
  explicit CsvWriter(const std::string& path);
  void write_row(std::span<const std::string> fields);
  void write_raw_line(const std::string& line);

private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace geoecon
