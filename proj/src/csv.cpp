#include "rcx/csv.hpp"

#include <charconv>
#include <system_error>

namespace rcx {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

namespace {

std::string_view trimmed(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

double parse_double_field(std::string_view field, const std::string& context) {
  const std::string_view f = trimmed(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc{} || ptr != f.data() + f.size()) {
    throw MalformedRow(context + ": cannot parse '" + std::string(field) +
                       "' as a number");
  }
  return v;
}

long long parse_int_field(std::string_view field, const std::string& context) {
  const std::string_view f = trimmed(field);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc{} || ptr != f.data() + f.size()) {
    throw MalformedRow(context + ": cannot parse '" + std::string(field) +
                       "' as an integer");
  }
  return v;
}

CsvFile read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw MalformedRow("cannot open " + path.string());
  }
  CsvFile csv;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!have_header) {
      csv.header = split_csv_line(line);
      have_header = true;
      continue;
    }
    csv.rows.push_back(split_csv_line(line));
    csv.line_numbers.push_back(line_no);
  }
  if (!have_header) {
    throw MalformedRow(path.string() + ": missing header line");
  }
  return csv;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  return out;
}

}  // namespace rcx
