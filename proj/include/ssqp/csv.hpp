#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ssqp {

// Shortest decimal form that parses back to the same double.
std::string format_real(double v);
double parse_real(std::string_view text, std::string_view what);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or -1.
  int column(std::string_view name) const;
  int require_column(std::string_view name) const;
};

// Comma-separated with optional double-quoted fields; blank lines are skipped.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

std::string csv_escape(std::string_view field);
std::string join_csv(const std::vector<std::string>& fields);

void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace ssqp
