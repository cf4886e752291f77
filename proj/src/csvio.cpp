#include "geoecon/csvio.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "geoecon/error.hpp"

namespace geoecon {

namespace {

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

CsvFile CsvFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  CsvFile f;
  f.text_.assign(std::istreambuf_iterator<char>(in),
                 std::istreambuf_iterator<char>());

  size_t pos = 0;
  size_t line_no = 0;
  const std::string_view text(f.text_);
  auto next_line = [&](std::string_view& out) {
    if (pos >= text.size()) return false;
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    out = strip_cr(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line) || line.empty())
    throw ValidationError("'" + path + "': missing header row");
  {
    size_t start = 0;
    while (true) {
      size_t comma = line.find(',', start);
      if (comma == std::string_view::npos) {
        f.header_.emplace_back(line.substr(start));
        break;
      }
      f.header_.emplace_back(line.substr(start, comma - start));
      start = comma + 1;
    }
  }
  const size_t ncols = f.header_.size();

  while (next_line(line)) {
    if (line.empty()) {
      // only trailing blank lines are tolerated
      if (pos >= text.size()) break;
      throw ValidationError("'" + path + "' line " + std::to_string(line_no) +
                            ": blank line inside data");
    }
    size_t start = 0;
    size_t count = 0;
    while (true) {
      size_t comma = line.find(',', start);
      if (comma == std::string_view::npos) {
        f.fields_.push_back(line.substr(start));
        ++count;
        break;
      }
      f.fields_.push_back(line.substr(start, comma - start));
      ++count;
      start = comma + 1;
    }
    if (count != ncols)
      throw ValidationError("'" + path + "' line " + std::to_string(line_no) +
                            ": expected " + std::to_string(ncols) +
                            " fields, found " + std::to_string(count));
    ++f.n_rows_;
  }
  return f;
}

size_t CsvFile::column(const std::string& name) const {
  auto idx = find_column(name);
  if (!idx) throw ValidationError("missing required column '" + name + "'");
  return *idx;
}

std::optional<size_t> CsvFile::find_column(const std::string& name) const {
  for (size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  return std::nullopt;
}

double parse_double_field(std::string_view field, size_t line,
                          const std::string& col, bool allow_empty) {
  if (field.empty()) {
    if (allow_empty) return std::numeric_limits<double>::quiet_NaN();
    throw ValidationError("line " + std::to_string(line) + ", column '" + col +
                          "': empty field");
  }
  double v = 0.0;
  const auto* begin = field.data();
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end)
    throw ValidationError("line " + std::to_string(line) + ", column '" + col +
                          "': malformed number '" + std::string(field) + "'");
  return v;
}

int64_t parse_int_field(std::string_view field, size_t line,
                        const std::string& col) {
  int64_t v = 0;
  const auto* begin = field.data();
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end || field.empty())
    throw ValidationError("line " + std::to_string(line) + ", column '" + col +
                          "': malformed integer '" + std::string(field) + "'");
  return v;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

CsvWriter::CsvWriter(const std::string& path)
    : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw IoError("cannot write '" + path + "'");
}

void CsvWriter::write_row(std::span<const std::string> fields) {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << fields[i];
  }
  out_ << '\n';
  if (!out_) throw IoError("write failed on '" + path_ + "'");
}

void CsvWriter::write_raw_line(const std::string& line) {
  out_ << line << '\n';
  if (!out_) throw IoError("write failed on '" + path_ + "'");
}

}  // namespace geoecon
