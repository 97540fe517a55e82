#include "rainfuse/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rainfuse::csv {

namespace {

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

Reader::Reader(const std::filesystem::path& path,
               const std::vector<std::string>& expected_header)
    : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw csv::IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  content_ = ss.str();

  std::vector<std::string_view> header;
  if (!next(header))
    throw std::runtime_error(path.string() + ": missing header row");
  bool ok = header.size() == expected_header.size();
  for (std::size_t j = 0; ok && j < header.size(); ++j) ok = header[j] == expected_header[j];
  if (!ok) {
    std::string want;
    for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
    throw std::runtime_error(path.string() + ": header must be '" + want + "'");
  }
}

bool Reader::next(std::vector<std::string_view>& fields) {
  while (pos_ < content_.size()) {
    std::size_t end = content_.find('\n', pos_);
    if (end == std::string::npos) end = content_.size();
    std::string_view line(content_.data() + pos_, end - pos_);
    pos_ = end + 1;
    ++line_no_;
    line = strip_cr(line);
    if (trim(line).empty()) continue;
    fields = split(line);
    return true;
  }
  return false;
}

std::optional<double> parse_optional_double(std::string_view field) {
  if (field.empty()) return std::nullopt;
  return parse_double(field);
}

double parse_double(std::string_view field) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
    throw std::invalid_argument("not a finite number: '" + std::string(field) + "'");
  return v;
}

long parse_long(std::string_view field) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw std::invalid_argument("not an integer: '" + std::string(field) + "'");
  return v;
}

void append_double(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  out.append(buf, ptr);
}

std::string format_double(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw csv::IoError("cannot write " + path.string());
  out << content;
  if (!out) throw csv::IoError("write failed for " + path.string());
}

}  // namespace rainfuse::csv
