#pragma once

#include "tabdiff/codec.hpp"
#include "tabdiff/common.hpp"

#include <string>
#include <vector>

namespace tabdiff {

enum class LayoutStrategy { Baseline, Clustered, Manual };

std::string to_string(LayoutStrategy s);
LayoutStrategy layout_strategy_from_string(const std::string& s);

struct CellRC {
  int row = 0;
  int col = 0;
  bool operator==(const CellRC&) const = default;
};

// Bijective map from encoded slots to grid cells. Blocks occupy consecutive
// positions of the placement traversal; the unmapped tail is padding.
struct Layout {
  LayoutStrategy strategy = LayoutStrategy::Baseline;
  int height = kGridHeight;
  int width = kGridWidth;
  std::vector<CellRC> cells;    // slot index -> cell
  std::vector<CellRC> padding;  // traversal tail, always exactly 0 on grids
  std::vector<int> column_order;  // schema columns in placement order

  int slot_count() const { return static_cast<int>(cells.size()); }
  void validate() const;  // injectivity + coverage
  uint64_t fingerprint() const;
  std::string to_json_text() const;
  static Layout from_json_text(const std::string& text);

  // Reproducibility export: one line per slot "column slot row col".
  std::string export_text(const CodecSpec& spec) const;
};

// Blocks in schema order along a row-major traversal.
Layout baseline_layout(const CodecSpec& spec, int height = kGridHeight, int width = kGridWidth);

// Block-level association between schema columns, entries in [0, 1] with unit
// diagonal: |Pearson r| for numeric-numeric pairs; for pairs involving a
// categorical column, the max |Pearson r| over its member one-hot indicator
// columns against the other column's members. Zero-variance columns get
// association 0 to all others and a warning.
Matrix association(const Table& table, std::vector<std::string>* warnings = nullptr);

// Leaf order of an average-linkage agglomerative clustering on dissimilarity
// 1 - assoc. Ties in merge distance are broken by the lexicographically least
// member name; children are ordered by (cluster size, least member name).
std::vector<int> cluster_leaf_order(const Matrix& assoc, const std::vector<std::string>& names);

// Columns in dendrogram leaf order along a boustrophedon (snake) traversal.
Layout clustered_layout(const CodecSpec& spec, const Matrix& assoc, int height = kGridHeight,
                        int width = kGridWidth);

// Ordered named groups of columns; every schema column exactly once.
struct PlacementPlan {
  struct Group {
    std::string name;
    std::vector<std::string> columns;
  };
  std::vector<Group> groups;

  std::string to_json_text() const;
  static PlacementPlan from_json_text(const std::string& text);
  static PlacementPlan from_file(const std::string& path);
};

// Blocks group-by-group in plan order along the snake traversal. Throws
// DataError if the plan omits or duplicates a schema column.
Layout manual_layout(const CodecSpec& spec, const PlacementPlan& plan, int height = kGridHeight,
                     int width = kGridWidth);

}  // namespace tabdiff
