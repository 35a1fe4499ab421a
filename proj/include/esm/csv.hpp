#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "esm/net.hpp"

namespace esm {

// RFC-4180-style CSV: quoted fields with "" escapes, CRLF or LF line ends.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // -1 when the header has no such column.
  int find_column(const std::string& name) const;
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::string& path);

// Quotes the field iff it contains a comma, quote, or newline.
std::string csv_escape(const std::string& field);

// Numeric cell with "row N, column 'name'" errors (N is the 1-based data row).
double parse_cell(const CsvTable& table, size_t row, int col);

struct NumericData {
  Matrix X;
  Vector y;
  std::vector<std::string> feature_names;
};

// y from the named response column, X from every other column in header
// order. Throws ValidationError naming the column when it is missing.
NumericData extract_dataset(const CsvTable& table, const std::string& response);

// All columns numeric, for prediction inputs.
Matrix extract_features(const CsvTable& table);

}  // namespace esm
