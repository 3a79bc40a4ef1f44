#include "tabdiff/codec.hpp"

#include "tabdiff/hash.hpp"
#include "tabdiff/layout.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace tabdiff {

using nlohmann::json;

const FeatureBlock& CodecSpec::block_for(const std::string& column_name) const {
  for (const auto& b : blocks)
    if (b.column_name == column_name) return b;
  throw DataError("codec has no block for column '" + column_name + "'");
}

CodecSpec fit_codec(const Table& table) {
  if (table.rows() == 0) throw DataError("fit_codec: empty table");
  CodecSpec spec;
  spec.schema = table.schema();
  // Vocabularies freeze at fit time, even when the loader fitted them from
  // data; the serialized codec must always carry them.
  for (auto& c : spec.schema.columns)
    if (c.kind == ColumnKind::Categorical) c.vocabulary_declared = true;
  spec.scalers.resize(spec.schema.columns.size());

  int offset = 0;
  for (size_t c = 0; c < spec.schema.columns.size(); ++c) {
    const ColumnSpec& col = spec.schema.columns[c];
    FeatureBlock block;
    block.column_name = col.name;
    block.column = static_cast<int>(c);
    block.offset = offset;
    if (col.kind == ColumnKind::Numeric) {
      const Vector& v = table.numeric_column(static_cast<int>(c));
      const double lo = v.minCoeff();
      const double hi = v.maxCoeff();
      if (!(lo < hi))
        throw DataError("fit_codec: numeric column '" + col.name + "' is constant (min == max == " +
                        std::to_string(lo) + ")");
      spec.scalers[c] = {lo, hi};
      block.width = 1;
      block.kind = BlockKind::Numeric;
    } else {
      if (col.vocabulary.empty())
        throw DataError("fit_codec: categorical column '" + col.name + "' has empty vocabulary");
      block.width = static_cast<int>(col.vocabulary.size());
      block.kind = BlockKind::OneHot;
    }
    offset += block.width;
    spec.blocks.push_back(std::move(block));
  }
  spec.encoded_width = offset;
  return spec;
}

Vector encode_row(const Table& table, Eigen::Index row, const CodecSpec& spec) {
  Vector out = Vector::Zero(spec.encoded_width);
  for (const auto& b : spec.blocks) {
    if (b.kind == BlockKind::Numeric) {
      const NumericScaler& s = spec.scalers[b.column];
      double v = table.num(row, b.column);
      v = std::clamp(v, s.min, s.max);
      out[b.offset] = (v - s.min) / (s.max - s.min);
    } else {
      const int code = table.code(row, b.column);
      if (code < 0 || code >= b.width)
        throw DataError("encode_row: unknown category code in column '" + b.column_name + "'");
      out[b.offset + code] = 1.0;
    }
  }
  return out;
}

Matrix encode_table(const Table& table, const CodecSpec& spec) {
  Matrix out = Matrix::Zero(table.rows(), spec.encoded_width);
  for (const auto& b : spec.blocks) {
    if (b.kind == BlockKind::Numeric) {
      // Same expression as encode_row so both paths agree to the last bit.
      const NumericScaler& s = spec.scalers[b.column];
      out.col(b.offset) =
          (table.numeric_column(b.column).array().max(s.min).min(s.max) - s.min) / (s.max - s.min);
    } else {
      const auto& codes = table.code_column(b.column);
      for (Eigen::Index r = 0; r < table.rows(); ++r) {
        const int code = codes[static_cast<size_t>(r)];
        if (code < 0 || code >= b.width)
          throw DataError("encode_table: unknown category code in column '" + b.column_name + "'");
        out(r, b.offset + code) = 1.0;
      }
    }
  }
  return out;
}

Grid vector_to_grid(const Vector& vec, const Layout& layout) {
  if (vec.size() != layout.slot_count())
    throw DataError("vector_to_grid: vector has " + std::to_string(vec.size()) +
                    " slots, layout maps " + std::to_string(layout.slot_count()));
  Grid grid = Grid::Zero(layout.height, layout.width);
  for (int s = 0; s < layout.slot_count(); ++s) {
    const CellRC& cell = layout.cells[s];
    grid(cell.row, cell.col) = 2.0 * vec[s] - 1.0;
  }
  return grid;
}

namespace {

double round_half_away(double v) {
  return v < 0.0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5);
}

}  // namespace

DecodedRow grid_to_row(const Grid& grid, const Layout& layout, const CodecSpec& spec,
                       const DecodeOptions& opts) {
  if (!grid.allFinite()) throw NumericError("grid_to_row: non-finite grid");
  if (grid.rows() != layout.height || grid.cols() != layout.width)
    throw DataError("grid_to_row: grid shape does not match layout");
  if (layout.slot_count() != spec.encoded_width)
    throw DataError("grid_to_row: layout/codec width mismatch");

  // Read the slots back to [0, 1] space.
  Vector slots(spec.encoded_width);
  for (int s = 0; s < spec.encoded_width; ++s) {
    double v = grid(layout.cells[s].row, layout.cells[s].col);
    if (opts.clamp) v = std::clamp(v, -1.0, 1.0);
    slots[s] = (v + 1.0) / 2.0;
  }

  DecodedRow row;
  row.nums.assign(spec.schema.columns.size(), 0.0);
  row.codes.assign(spec.schema.columns.size(), -1);
  for (const auto& b : spec.blocks) {
    if (b.kind == BlockKind::Numeric) {
      const NumericScaler& s = spec.scalers[b.column];
      double v = slots[b.offset] * (s.max - s.min) + s.min;
      if (spec.schema.columns[b.column].integer) v = round_half_away(v);
      row.nums[b.column] = v;
    } else {
      int best = 0;
      double best_v = slots[b.offset];
      for (int k = 1; k < b.width; ++k) {
        if (slots[b.offset + k] > best_v) {
          best_v = slots[b.offset + k];
          best = k;
        }
      }
      row.codes[b.column] = best;
    }
  }
  return row;
}

Table decode_grids(const std::vector<Grid>& grids, const Layout& layout, const CodecSpec& spec,
                   const DecodeOptions& opts) {
  Table table(spec.schema);
  table.reserve(static_cast<Eigen::Index>(grids.size()));
  for (const auto& g : grids) {
    DecodedRow row = grid_to_row(g, layout, spec, opts);
    table.append_row(row.nums, row.codes);
  }
  table.finalize();
  return table;
}

void dump_grids(const std::vector<Grid>& grids, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open grid dump: " + path);
  char buf[32];
  for (const auto& g : grids) {
    for (int r = 0; r < g.rows(); ++r) {
      for (int c = 0; c < g.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.6g", g(r, c));
        if (r || c) out << ' ';
        out << buf;
      }
    }
    out << '\n';
  }
}

namespace {

json codec_to_json(const CodecSpec& spec) {
  json j;
  j["schema"] = json::parse(schema_to_config(spec.schema));
  json blocks = json::array();
  for (const auto& b : spec.blocks) {
    blocks.push_back({{"column", b.column_name},
                      {"offset", b.offset},
                      {"width", b.width},
                      {"kind", b.kind == BlockKind::Numeric ? "numeric" : "onehot"}});
  }
  j["blocks"] = std::move(blocks);
  json scalers = json::object();
  for (const auto& b : spec.blocks)
    if (b.kind == BlockKind::Numeric)
      scalers[b.column_name] = {{"min", spec.scalers[b.column].min},
                                {"max", spec.scalers[b.column].max}};
  j["scalers"] = std::move(scalers);
  j["encoded_width"] = spec.encoded_width;
  return j;
}

}  // namespace

std::string CodecSpec::to_json_text() const { return codec_to_json(*this).dump(2) + "\n"; }

CodecSpec CodecSpec::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("codec spec is not valid JSON: ") + e.what());
  }
  CodecSpec spec;
  spec.schema = parse_schema(j.at("schema").dump());
  // Vocabularies in a codec dump are always concrete; treat them as frozen.
  for (auto& c : spec.schema.columns)
    if (c.kind == ColumnKind::Categorical && !c.vocabulary.empty()) c.vocabulary_declared = true;
  spec.scalers.resize(spec.schema.columns.size());
  for (const auto& jb : j.at("blocks")) {
    FeatureBlock b;
    b.column_name = jb.at("column").get<std::string>();
    b.column = spec.schema.column_index(b.column_name);
    if (b.column < 0) throw DataError("codec block references unknown column '" + b.column_name + "'");
    b.offset = jb.at("offset").get<int>();
    b.width = jb.at("width").get<int>();
    b.kind = jb.at("kind").get<std::string>() == "numeric" ? BlockKind::Numeric : BlockKind::OneHot;
    if (b.kind == BlockKind::Numeric) {
      const auto& js = j.at("scalers").at(b.column_name);
      spec.scalers[b.column] = {js.at("min").get<double>(), js.at("max").get<double>()};
    }
    spec.blocks.push_back(std::move(b));
  }
  spec.encoded_width = j.at("encoded_width").get<int>();
  int total = 0;
  for (const auto& b : spec.blocks) total += b.width;
  if (total != spec.encoded_width) throw DataError("codec spec block widths do not tile encoded_width");
  return spec;
}

uint64_t CodecSpec::fingerprint() const { return fnv1a64(codec_to_json(*this).dump()); }

}  // namespace tabdiff
