#include "fri/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fri/errors.hpp"

namespace fri::csv {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open for reading: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

void write_column(const std::filesystem::path& path, const std::vector<double>& values) {
  std::vector<std::string> lines;
  lines.reserve(values.size());
  for (double v : values) lines.push_back(format_double(v));
  write_lines(path, lines);
}

std::vector<double> read_column(const std::filesystem::path& path) {
  std::vector<double> out;
  for (const auto& l : read_lines(path)) {
    if (l.empty()) continue;
    out.push_back(std::stod(l));
  }
  return out;
}

void write_table(const std::filesystem::path& path, const std::string& header,
                 const std::vector<std::vector<double>>& rows) {
  std::vector<std::string> lines;
  if (!header.empty()) lines.push_back(header);
  for (const auto& row : rows) {
    std::string l;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) l += ',';
      l += format_double(row[i]);
    }
    lines.push_back(l);
  }
  write_lines(path, lines);
}

std::vector<std::vector<double>> read_table(const std::filesystem::path& path) {
  std::vector<std::vector<double>> rows;
  bool first = true;
  for (const auto& l : read_lines(path)) {
    if (l.empty()) continue;
    auto cells = split(l);
    std::vector<double> row;
    bool numeric = true;
    try {
      for (const auto& c : cells) row.push_back(std::stod(c));
    } catch (const std::exception&) {
      numeric = false;
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw ConfigError("non-numeric row in " + path.string() + ": " + l);
    }
    first = false;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fri::csv
