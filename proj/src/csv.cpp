#include "robustmm/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace robustmm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Parses the whole field as a number; NaN/Inf spellings count as numbers here
// so they are reported as bad values rather than mistaken for a header.
bool parse_number(const std::string& field, double& value) {
  if (field.empty()) return false;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  int line_no = 0;
  std::size_t width = 0;
  bool first_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (line.find('"') != std::string::npos || line.find('\'') != std::string::npos) {
      throw InputError("line " + std::to_string(line_no) + ": quoted fields are not supported");
    }
    const auto fields = split(line);
    if (first_row) {
      first_row = false;
      width = fields.size();
      bool numeric = true;
      double tmp = 0.0;
      for (const auto& f : fields) numeric = numeric && parse_number(f, tmp);
      if (!numeric) {
        table.header = fields;
        continue;
      }
    }
    if (fields.size() != width) {
      throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) + " fields, found " +
                       std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const std::string col = table.header.empty() ? std::to_string(j + 1) : table.header[j];
      if (!parse_number(fields[j], row[j])) {
        throw InputError("line " + std::to_string(line_no) + ", column " + col + ": cannot parse '" + fields[j] + "'");
      }
      if (!std::isfinite(row[j])) {
        throw InputError("line " + std::to_string(line_no) + ", column " + col + ": non-finite value '" + fields[j] +
                         "'");
      }
    }
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(line_no);
  }
  if (table.rows.empty()) throw InputError("CSV contains no data rows");
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_csv(in);
}

std::size_t resolve_column(const CsvTable& table, const std::string& ref) {
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j] == ref) return j;
  }
  const std::size_t width = table.rows.front().size();
  std::size_t index = 0;
  const auto [ptr, ec] = std::from_chars(ref.data(), ref.data() + ref.size(), index);
  if (ec != std::errc() || ptr != ref.data() + ref.size() || index < 1 || index > width) {
    throw InputError("unknown column '" + ref + "'");
  }
  return index - 1;
}

Dataset select_dataset(const CsvTable& table, const std::string& y_col, const std::vector<std::string>& x_cols) {
  const std::size_t y_idx = resolve_column(table, y_col);
  std::vector<std::size_t> x_idx;
  for (const auto& c : x_cols) x_idx.push_back(resolve_column(table, c));
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Dataset d{Matrix(n, static_cast<Eigen::Index>(x_idx.size())), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    d.y(i) = row[y_idx];
    for (std::size_t j = 0; j < x_idx.size(); ++j) d.x(i, static_cast<Eigen::Index>(j)) = row[x_idx[j]];
  }
  return d;
}

}  // namespace robustmm
