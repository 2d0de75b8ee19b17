#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "rcx/errors.hpp"

namespace rcx {

/// Format a double with 9 significant digits (the pipeline-wide precision
/// for numeric text artifacts).
inline std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<std::string> split_csv_line(std::string_view line);

/// Strict double parse of a whole field; throws MalformedRow with `context`.
double parse_double_field(std::string_view field, const std::string& context);

/// Strict integer parse of a whole field; throws MalformedRow with `context`.
long long parse_int_field(std::string_view field, const std::string& context);

struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based physical line number per data row (comments and header counted).
  std::vector<int> line_numbers;
};

/// Reads a CSV with one header line. Lines starting with '#' are skipped
/// (artifact files carry a `# config_hash=...` line).
CsvFile read_csv(const std::filesystem::path& path);

std::ofstream open_output(const std::filesystem::path& path);

}  // namespace rcx
