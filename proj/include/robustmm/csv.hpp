#pragma once

#include "robustmm/model.hpp"

#include <istream>
#include <string>
#include <vector>

namespace robustmm {

// Comma-separated numeric table with an optional header row. Quoted fields are
// rejected. Every cell must parse as a finite number.
struct CsvTable {
  std::vector<std::string> header;  // empty when the file has no header
  std::vector<std::vector<double>> rows;
  std::vector<int> line_numbers;  // source line of each row (1-based)
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Resolves a column reference: a header name, or a 1-based column number.
std::size_t resolve_column(const CsvTable& table, const std::string& ref);

/// Builds a dataset from the selected response and regressor columns.
Dataset select_dataset(const CsvTable& table, const std::string& y_col, const std::vector<std::string>& x_cols);

}  // namespace robustmm
