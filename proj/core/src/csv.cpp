#include "pandora/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace pandora {

namespace {

std::string location(const std::string& file, std::size_t line, const std::string& column) {
  std::string s = file + ":" + std::to_string(line);
  if (!column.empty()) s += ":" + column;
  return s;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

CsvError::CsvError(std::string file_, std::size_t line_, std::string column_, const std::string& what)
    : std::runtime_error(location(file_, line_, column_) + ": " + what),
      file(std::move(file_)),
      line(line_),
      column(std::move(column_)) {}

std::size_t CsvTable::find_column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::string::npos;
}

std::size_t CsvTable::require_column(const std::string& name) const {
  const std::size_t i = find_column(name);
  if (i == std::string::npos) throw CsvError(source, 1, name, "missing required column");
  return i;
}

void CsvTable::fail(std::size_t row, std::size_t col, const std::string& what) const {
  throw CsvError(source, lines.at(row), col < header.size() ? header[col] : std::to_string(col + 1),
                 what);
}

double CsvTable::number(std::size_t row, std::size_t col, bool allow_empty) const {
  const std::string_view text = trim(cell(row, col));
  if (text.empty()) {
    if (allow_empty) return std::nan("");
    fail(row, col, "empty value");
  }
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(v)) {
    fail(row, col, "expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

long long CsvTable::count(std::size_t row, std::size_t col) const {
  const std::string_view text = trim(cell(row, col));
  long long v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || v < 0) {
    fail(row, col, "expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

CsvTable parse_csv(std::string_view text, std::string source) {
  CsvTable t;
  t.source = std::move(source);
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<std::string> record;
  std::string field;
  std::size_t line = 1, record_line = 1;
  bool in_quotes = false, field_quoted = false, any = false;

  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    const bool blank = record.size() == 1 && record[0].empty() && !field_quoted;
    if (!blank) {
      if (t.header.empty()) {
        t.header = std::move(record);
        for (auto& h : t.header) h = std::string(trim(h));
      } else {
        if (record.size() != t.header.size()) {
          throw CsvError(t.source, record_line, "",
                         "expected " + std::to_string(t.header.size()) + " fields, found " +
                             std::to_string(record.size()));
        }
        t.rows.push_back(std::move(record));
        t.lines.push_back(record_line);
      }
    }
    record.clear();
    field_quoted = false;
    any = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (!any) {
      record_line = line;
      any = true;
    }
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      in_quotes = true;
      field_quoted = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      end_record();
      ++line;
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) throw CsvError(t.source, record_line, "", "unterminated quoted field");
  if (any) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    end_record();
  }
  if (t.header.empty()) throw CsvError(t.source, 1, "", "missing header row");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError(path.string(), 0, "", "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path.string());
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_number(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace pandora
