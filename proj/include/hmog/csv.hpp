#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hmog {

/// Maps canonical column names to the column names used by a foreign source.
/// Loaded from `canonical_column = source_column` lines; `#` starts a comment.
class ColumnMapping {
 public:
  ColumnMapping() = default;

  static ColumnMapping parse(std::istream& in);
  static ColumnMapping load(const std::string& path);

  void set(std::string canonical, std::string source);
  /// Source name for a canonical column (identity when unmapped).
  std::string source_for(const std::string& canonical) const;
  bool empty() const { return to_source_.empty(); }

 private:
  std::map<std::string, std::string> to_source_;
};

/// Minimal reader for the comma-separated formats used throughout the project
/// (no quoting). Blank lines and lines starting with `#` are skipped.
class CsvReader {
 public:
  CsvReader(std::istream& in, std::string source_name,
            const ColumnMapping& mapping = {});

  /// Index of a canonical column; throws a data error if missing.
  std::size_t column(const std::string& canonical) const;
  std::optional<std::size_t> find_column(const std::string& canonical) const;
  const std::vector<std::string>& header() const { return header_; }

  /// Reads the next row. Returns false at end of input. Throws on a row whose
  /// field count differs from the header.
  bool next();

  std::string_view field(std::size_t index) const { return fields_[index]; }
  double number(std::size_t index) const;
  std::int64_t integer(std::size_t index) const;
  /// Milliseconds; fractional values are floored.
  std::int64_t millis(std::size_t index) const;

  std::size_t line_number() const { return line_no_; }
  [[noreturn]] void fail(const std::string& what) const;

 private:
  bool read_line(std::string& out);

  std::istream& in_;
  std::string source_;
  ColumnMapping mapping_;
  std::vector<std::string> header_;
  std::string line_;
  std::vector<std::string_view> fields_;
  std::size_t line_no_ = 0;
};

std::vector<std::string_view> split_fields(std::string_view line,
                                           char sep = ',');

/// Shortest decimal text that parses back to the same double; empty for NaN.
std::string format_double(double value);

std::string trim(std::string_view s);

}  // namespace hmog
