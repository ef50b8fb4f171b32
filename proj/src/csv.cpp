#include "hmog/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "hmog/error.hpp"

namespace hmog {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

ColumnMapping ColumnMapping::parse(std::istream& in) {
  ColumnMapping mapping;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw config_error("mapping line " + std::to_string(line_no) +
                         ": expected 'canonical = source'");
    }
    std::string canonical = trim(std::string_view(stripped).substr(0, eq));
    std::string source = trim(std::string_view(stripped).substr(eq + 1));
    if (canonical.empty() || source.empty()) {
      throw config_error("mapping line " + std::to_string(line_no) +
                         ": empty column name");
    }
    mapping.set(std::move(canonical), std::move(source));
  }
  return mapping;
}

ColumnMapping ColumnMapping::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open mapping config " + path);
  return parse(in);
}

void ColumnMapping::set(std::string canonical, std::string source) {
  to_source_[std::move(canonical)] = std::move(source);
}

std::string ColumnMapping::source_for(const std::string& canonical) const {
  const auto it = to_source_.find(canonical);
  return it == to_source_.end() ? canonical : it->second;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string format_double(double value) {
  if (std::isnan(value)) return {};
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

CsvReader::CsvReader(std::istream& in, std::string source_name,
                     const ColumnMapping& mapping)
    : in_(in), source_(std::move(source_name)), mapping_(mapping) {
  std::string header_line;
  if (!read_line(header_line)) {
    throw data_error(source_ + ": missing header");
  }
  for (auto f : split_fields(header_line)) header_.push_back(trim(f));
}

bool CsvReader::read_line(std::string& out) {
  while (std::getline(in_, out)) {
    ++line_no_;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    if (out.empty() || out.front() == '#') continue;
    return true;
  }
  return false;
}

std::optional<std::size_t> CsvReader::find_column(
    const std::string& canonical) const {
  const std::string source = mapping_.source_for(canonical);
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == source) return i;
  }
  return std::nullopt;
}

std::size_t CsvReader::column(const std::string& canonical) const {
  if (auto idx = find_column(canonical)) return *idx;
  throw data_error(source_ + ": missing column '" + canonical + "'");
}

bool CsvReader::next() {
  if (!read_line(line_)) return false;
  fields_ = split_fields(line_);
  if (fields_.size() != header_.size()) {
    fail("expected " + std::to_string(header_.size()) + " fields, got " +
         std::to_string(fields_.size()));
  }
  return true;
}

void CsvReader::fail(const std::string& what) const {
  throw data_error(source_ + " line " + std::to_string(line_no_) +
                   ": malformed row: " + what);
}

double CsvReader::number(std::size_t index) const {
  const std::string text = trim(fields_[index]);
  double value = 0.0;
  const auto res =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() ||
      res.ptr != text.data() + text.size() || !std::isfinite(value)) {
    fail("bad number '" + text + "' in column " + header_[index]);
  }
  return value;
}

std::int64_t CsvReader::integer(std::size_t index) const {
  const std::string text = trim(fields_[index]);
  std::int64_t value = 0;
  const auto res =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() ||
      res.ptr != text.data() + text.size()) {
    fail("bad integer '" + text + "' in column " + header_[index]);
  }
  return value;
}

std::int64_t CsvReader::millis(std::size_t index) const {
  return static_cast<std::int64_t>(std::floor(number(index)));
}

}  // namespace hmog
