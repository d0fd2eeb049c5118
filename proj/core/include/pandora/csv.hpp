#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pandora {

/// Schema or parse error. The message reads "<file>:<line>:<column>: <what>".
struct CsvError : std::runtime_error {
  CsvError(std::string file_, std::size_t line_, std::string column_, const std::string& what);
  std::string file;
  std::size_t line;
  std::string column;
};

/// Header plus string cells. Quoted fields ("a,b", "say ""hi""") are
/// unquoted; blank lines are skipped.
struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row

  /// Index of a header column; throws CsvError if absent.
  std::size_t require_column(const std::string& name) const;
  /// Index of a header column, or npos.
  std::size_t find_column(const std::string& name) const;

  [[noreturn]] void fail(std::size_t row, std::size_t col, const std::string& what) const;

  const std::string& cell(std::size_t row, std::size_t col) const { return rows[row][col]; }
  /// Parses a cell as a finite decimal number. An empty cell is NaN when
  /// `allow_empty`, otherwise an error.
  double number(std::size_t row, std::size_t col, bool allow_empty = false) const;
  /// Parses a cell as a non-negative integer.
  long long count(std::size_t row, std::size_t col) const;
};

CsvTable parse_csv(std::string_view text, std::string source);
CsvTable read_csv(const std::filesystem::path& path);

/// Quotes a field only when it contains a comma, quote or newline.
std::string csv_field(std::string_view text);
/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

/// Writes `content` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace pandora
