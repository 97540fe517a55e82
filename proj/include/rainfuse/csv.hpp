#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rainfuse::csv {

/// File could not be opened or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Header-checked line reader for the small comma-separated formats used
/// here. Fields are not quoted.
class Reader {
 public:
  Reader(const std::filesystem::path& path, const std::vector<std::string>& expected_header);

  /// Next data row; false at end of file. `line()` is 1-based and counts
  /// the header.
  bool next(std::vector<std::string_view>& fields);
  long line() const { return line_no_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::string content_;
  std::size_t pos_ = 0;
  long line_no_ = 0;
};

std::vector<std::string_view> split(std::string_view line);

/// Parses a decimal number. nullopt for an empty field; throws
/// std::invalid_argument for anything unparseable or non-finite.
std::optional<double> parse_optional_double(std::string_view field);
double parse_double(std::string_view field);
long parse_long(std::string_view field);

/// Shortest representation that round-trips exactly.
std::string format_double(double v);
void append_double(std::string& out, double v);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace rainfuse::csv
