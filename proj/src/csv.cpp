#include "esm/csv.hpp"

#include <cstdlib>
#include <fstream>
#include <istream>

#include "esm/errors.hpp"

namespace esm {

namespace {

// One record, honoring quotes (so embedded newlines stay inside the field).
// Returns false on end of input with nothing read.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool quoted = false;
  bool any = false;
  int ch;
  while ((ch = in.get()) != EOF) {
    any = true;
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else {
      field.push_back(c);
    }
  }
  if (!any) return false;
  if (quoted) throw ValidationError("unterminated quoted CSV field");
  fields.push_back(std::move(field));
  return true;
}

}  // namespace

int CsvTable::find_column(const std::string& name) const {
  for (size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return static_cast<int>(j);
  }
  return -1;
}

CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  if (!read_record(in, table.header) || table.header.empty()) {
    throw ValidationError("CSV file has no header row");
  }
  std::vector<std::string> fields;
  while (read_record(in, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != table.header.size()) {
      throw ValidationError("row " + std::to_string(table.rows.size() + 1) +
                            ": has " + std::to_string(fields.size()) +
                            " fields, header has " +
                            std::to_string(table.header.size()));
    }
    table.rows.push_back(fields);
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return parse_csv(in);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

double parse_cell(const CsvTable& table, size_t row, int col) {
  const std::string& text = table.rows[row][col];
  const char* begin = text.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw ValidationError("row " + std::to_string(row + 1) + ", column '" +
                          table.header[col] + "': cannot parse \"" + text +
                          "\" as a number");
  }
  return value;
}

NumericData extract_dataset(const CsvTable& table,
                            const std::string& response) {
  const int y_col = table.find_column(response);
  if (y_col < 0) {
    throw ValidationError("response column '" + response +
                          "' not found in CSV header");
  }
  const size_t n = table.rows.size();
  const size_t p = table.header.size() - 1;
  if (n == 0) throw ValidationError("CSV file has no data rows");
  if (p == 0) throw ValidationError("CSV file has no feature columns");

  NumericData data;
  data.X.resize(static_cast<long>(n), static_cast<long>(p));
  data.y.resize(static_cast<long>(n));
  for (size_t j = 0; j < table.header.size(); ++j) {
    if (static_cast<int>(j) != y_col) data.feature_names.push_back(table.header[j]);
  }
  for (size_t i = 0; i < n; ++i) {
    long k = 0;
    for (size_t j = 0; j < table.header.size(); ++j) {
      if (static_cast<int>(j) == y_col) {
        data.y(static_cast<long>(i)) = parse_cell(table, i, static_cast<int>(j));
      } else {
        data.X(static_cast<long>(i), k++) = parse_cell(table, i, static_cast<int>(j));
      }
    }
  }
  return data;
}

Matrix extract_features(const CsvTable& table) {
  const size_t n = table.rows.size();
  const size_t p = table.header.size();
  if (n == 0) throw ValidationError("CSV file has no data rows");
  Matrix X(static_cast<long>(n), static_cast<long>(p));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < p; ++j) {
      X(static_cast<long>(i), static_cast<long>(j)) =
          parse_cell(table, i, static_cast<int>(j));
    }
  }
  return X;
}

}  // namespace esm
