#pragma once

#include "tabdiff/common.hpp"
#include "tabdiff/schema.hpp"

#include <string>
#include <vector>

namespace tabdiff {

enum class BlockKind { Numeric, OneHot };

// One schema column's contiguous run of encoded slots.
struct FeatureBlock {
  std::string column_name;
  int column = 0;  // schema index
  int offset = 0;  // first slot
  int width = 1;
  BlockKind kind = BlockKind::Numeric;
};

struct NumericScaler {
  double min = 0.0;
  double max = 1.0;
};

// Fitted per-column transforms: min/max scalers for numeric columns, frozen
// vocabularies for categorical ones, and the block table tiling
// [0, encoded_width).
struct CodecSpec {
  Schema schema;  // vocabularies frozen at fit time
  std::vector<FeatureBlock> blocks;       // schema order
  std::vector<NumericScaler> scalers;     // per schema column; meaningful for numeric only
  int encoded_width = 0;

  const FeatureBlock& block_for(const std::string& column_name) const;
  uint64_t fingerprint() const;
  std::string to_json_text() const;
  static CodecSpec from_json_text(const std::string& text);
};

// Fit min/max scalers over the table and freeze vocabularies. Throws
// DataError on an empty table or a constant numeric column.
CodecSpec fit_codec(const Table& table);

struct Layout;  // layout.hpp

// Encoded feature vector of one row: numeric slots (v - min)/(max - min)
// with out-of-range values clamped, one-hot blocks with a single 1.0.
Vector encode_row(const Table& table, Eigen::Index row, const CodecSpec& spec);

// All rows; n x encoded_width. Row order preserved.
Matrix encode_table(const Table& table, const CodecSpec& spec);

// Place slot values on the grid as 2v - 1 ([0,1] -> [-1,1]); padding cells 0.
Grid vector_to_grid(const Vector& vec, const Layout& layout);

// One decoded record, parallel to the schema.
struct DecodedRow {
  std::vector<double> nums;  // numeric columns (original units)
  std::vector<int> codes;    // categorical columns (vocabulary index)
};

struct DecodeOptions {
  // Clamp grid cells to [-1, 1] before inverting the scalers. Disabling this
  // lets out-of-range samples decode to out-of-range values (e.g. negative
  // capital gains), the failure mode the baseline configuration exhibits.
  bool clamp = true;
};

// Total on finite grids: inverse scaling for numeric slots (rounded
// half-away-from-zero when the column is integer), argmax per one-hot block
// (ties -> lowest index).
DecodedRow grid_to_row(const Grid& grid, const Layout& layout, const CodecSpec& spec,
                       const DecodeOptions& opts = {});

Table decode_grids(const std::vector<Grid>& grids, const Layout& layout, const CodecSpec& spec,
                   const DecodeOptions& opts = {});

// Debug dump: one grid per line, height*width space-separated values in
// row-major order, 6 significant digits.
void dump_grids(const std::vector<Grid>& grids, const std::string& path);

}  // namespace tabdiff
