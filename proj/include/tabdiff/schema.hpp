#pragma once

#include "tabdiff/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tabdiff {

enum class ColumnKind { Numeric, Categorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  bool integer = false;  // numeric columns only
  std::optional<std::pair<double, double>> valid_range;  // numeric, documentation/audit bounds
  std::vector<std::string> vocabulary;  // categorical; declared or fitted at load
  bool vocabulary_declared = false;
};

struct Schema {
  std::vector<ColumnSpec> columns;

  int column_index(const std::string& name) const;
  const ColumnSpec& column(const std::string& name) const;  // throws DataError if absent
  size_t size() const { return columns.size(); }

  // Throws DataError on duplicate names, empty declared vocabularies, or
  // inverted ranges.
  void validate() const;
};

// Schema config: a JSON document { "columns": [ {name, kind, integer?,
// range?, vocabulary?} ] }. Round-trips losslessly through schema_to_config.
Schema parse_schema(const std::string& config_text);
Schema load_schema_file(const std::string& path);
std::string schema_to_config(const Schema& schema);

enum class MissingPolicy {
  DropIncomplete,  // discard any row containing the "?" sentinel
  Error,           // fail on the first "?" cell
};

struct CleaningPolicy {
  MissingPolicy missing = MissingPolicy::DropIncomplete;
  // When a column's vocabulary is declared, an unseen category is an error
  // unless extension is allowed here. Undeclared vocabularies are always
  // fitted from the data (sorted lexicographically).
  bool extend_declared_vocabulary = false;
};

// Canonical in-memory table: columnar storage, immutable after load.
// Categorical cells are stored as indices into the column's vocabulary.
class Table {
 public:
  Table() = default;
  explicit Table(Schema schema);

  const Schema& schema() const { return schema_; }
  Eigen::Index rows() const { return n_rows_; }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(schema_.columns.size()); }

  double num(Eigen::Index row, int col) const { return numeric_[col][row]; }
  int code(Eigen::Index row, int col) const { return codes_[col][row]; }
  const std::string& cat(Eigen::Index row, int col) const {
    return schema_.columns[col].vocabulary[codes_[col][row]];
  }

  const Vector& numeric_column(int col) const { return numeric_[col]; }
  const std::vector<int>& code_column(int col) const { return codes_[col]; }

  // Append one row; cells are parallel to the schema (numeric value or
  // vocabulary index, the other entry ignored). Used by loaders and decoders.
  void append_row(const std::vector<double>& nums, const std::vector<int>& codes);

  void reserve(Eigen::Index n);
  void finalize();  // shrink buffers after bulk appends

  Table head(Eigen::Index n) const;  // first n rows (or all, if fewer)

 private:
  Schema schema_;
  Eigen::Index n_rows_ = 0;
  std::vector<Vector> numeric_;             // per column; empty for categorical
  std::vector<std::vector<double>> numeric_buf_;
  std::vector<std::vector<int>> codes_;     // per column; empty for numeric
};

// Load a UCI-style CSV (comma separated, optional single space after commas,
// no quoting) against the schema. With header=true the first row must match
// the schema column names (order-insensitive); with header=false the schema
// order is applied positionally. Lines starting with '|' and blank lines are
// skipped. Categorical cells are whitespace-trimmed and a single trailing
// '.' is stripped (UCI test-split label variant).
Table load_table(const std::string& csv_path, const Schema& schema,
                 const CleaningPolicy& policy = {}, bool header = true);

struct LoadStats {
  long raw_rows = 0;      // data rows seen
  long dropped_rows = 0;  // rows removed by the missing-value policy
};

Table load_table(const std::string& csv_path, const Schema& schema, const CleaningPolicy& policy,
                 bool header, LoadStats* stats);

// Write a table back out as CSV with a header row, in original units and
// category strings. Numeric formatting is shortest-round-trip and locale
// free, so identical tables serialize to identical bytes.
void write_csv(const Table& table, const std::string& path);
std::string format_numeric_cell(double v, bool integer);

}  // namespace tabdiff
