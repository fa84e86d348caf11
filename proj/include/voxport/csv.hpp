#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace voxport {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Comma-separated text without quoting. The first line must equal
/// `expected_header` when it is non-empty; every row must have as many fields
/// as the header. Blank lines are skipped. Throws IoError or ParseError
/// (with path:line).
CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected_header = {});

double parse_csv_double(std::string_view field, const std::string& where);
long long parse_csv_integer(std::string_view field, const std::string& where, long long min_value);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

}  // namespace voxport
