#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace fri::csv {

// All floating point values are written with %.17g so that files are
// reproduced bit-identically from identical inputs.
std::string format_double(double v);

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::vector<std::string> split(const std::string& line, char sep = ',');

// one value per line
void write_column(const std::filesystem::path& path, const std::vector<double>& values);
std::vector<double> read_column(const std::filesystem::path& path);

// rows of doubles, optional header line
void write_table(const std::filesystem::path& path, const std::string& header,
                 const std::vector<std::vector<double>>& rows);
// skips a non-numeric first line when present
std::vector<std::vector<double>> read_table(const std::filesystem::path& path);

}  // namespace fri::csv
