#include "tabdiff/layout.hpp"

#include "tabdiff/hash.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <tuple>
#include <utility>

namespace tabdiff {

using nlohmann::json;

std::string to_string(LayoutStrategy s) {
  switch (s) {
    case LayoutStrategy::Baseline: return "baseline";
    case LayoutStrategy::Clustered: return "clustered";
    case LayoutStrategy::Manual: return "manual";
  }
  throw NumericError("unreachable layout strategy");
}

LayoutStrategy layout_strategy_from_string(const std::string& s) {
  if (s == "baseline") return LayoutStrategy::Baseline;
  if (s == "clustered") return LayoutStrategy::Clustered;
  if (s == "manual") return LayoutStrategy::Manual;
  throw UsageError("unknown layout strategy '" + s + "' (expected baseline|clustered|manual)");
}

void Layout::validate() const {
  std::vector<char> seen(static_cast<size_t>(height) * width, 0);
  auto touch = [&](const CellRC& c, const char* what) {
    if (c.row < 0 || c.row >= height || c.col < 0 || c.col >= width)
      throw DataError(std::string("layout ") + what + " cell out of bounds");
    char& flag = seen[static_cast<size_t>(c.row) * width + c.col];
    if (flag) throw DataError(std::string("layout ") + what + " cell mapped twice");
    flag = 1;
  };
  for (const auto& c : cells) touch(c, "slot");
  for (const auto& c : padding) touch(c, "padding");
  for (char flag : seen)
    if (!flag) throw DataError("layout does not cover every grid cell");
}

namespace {

json layout_to_json(const Layout& layout) {
  json j;
  j["strategy"] = to_string(layout.strategy);
  j["height"] = layout.height;
  j["width"] = layout.width;
  json cells = json::array();
  for (const auto& c : layout.cells) cells.push_back({c.row, c.col});
  j["cells"] = std::move(cells);
  json pad = json::array();
  for (const auto& c : layout.padding) pad.push_back({c.row, c.col});
  j["padding"] = std::move(pad);
  j["column_order"] = layout.column_order;
  return j;
}

}  // namespace

std::string Layout::to_json_text() const { return layout_to_json(*this).dump(2) + "\n"; }

Layout Layout::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("layout is not valid JSON: ") + e.what());
  }
  Layout layout;
  try {
    layout.strategy = layout_strategy_from_string(j.at("strategy").get<std::string>());
    layout.height = j.at("height").get<int>();
    layout.width = j.at("width").get<int>();
    for (const auto& jc : j.at("cells"))
      layout.cells.push_back({jc.at(0).get<int>(), jc.at(1).get<int>()});
    for (const auto& jc : j.at("padding"))
      layout.padding.push_back({jc.at(0).get<int>(), jc.at(1).get<int>()});
    layout.column_order = j.at("column_order").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed layout JSON: ") + e.what());
  }
  layout.validate();
  return layout;
}

uint64_t Layout::fingerprint() const { return fnv1a64(layout_to_json(*this).dump()); }

std::string Layout::export_text(const CodecSpec& spec) const {
  if (slot_count() != spec.encoded_width)
    throw DataError("layout/codec width mismatch in export");
  std::ostringstream out;
  out << "column slot row col\n";
  for (const auto& b : spec.blocks)
    for (int k = 0; k < b.width; ++k) {
      const int slot = b.offset + k;
      const CellRC& c = cells[slot];
      out << b.column_name << ' ' << slot << ' ' << c.row << ' ' << c.col << '\n';
    }
  int pos = slot_count();
  for (const auto& c : padding)
    out << "(padding) " << pos++ << ' ' << c.row << ' ' << c.col << '\n';
  return out.str();
}

namespace {

std::vector<CellRC> row_major_traversal(int height, int width) {
  std::vector<CellRC> cells;
  cells.reserve(static_cast<size_t>(height) * width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) cells.push_back({r, c});
  return cells;
}

std::vector<CellRC> snake_traversal(int height, int width) {
  std::vector<CellRC> cells;
  cells.reserve(static_cast<size_t>(height) * width);
  for (int r = 0; r < height; ++r) {
    if (r % 2 == 0)
      for (int c = 0; c < width; ++c) cells.push_back({r, c});
    else
      for (int c = width - 1; c >= 0; --c) cells.push_back({r, c});
  }
  return cells;
}

// Lay blocks down in column_order along the traversal; tail becomes padding.
Layout place(const CodecSpec& spec, LayoutStrategy strategy, std::vector<int> column_order,
             std::vector<CellRC> traversal, int height, int width) {
  if (spec.encoded_width > height * width)
    throw DataError("encoded width " + std::to_string(spec.encoded_width) +
                    " exceeds grid capacity " + std::to_string(height * width));
  Layout layout;
  layout.strategy = strategy;
  layout.height = height;
  layout.width = width;
  layout.cells.resize(spec.encoded_width);
  size_t pos = 0;
  for (int col : column_order) {
    const FeatureBlock& b = spec.blocks[col];
    for (int k = 0; k < b.width; ++k) layout.cells[b.offset + k] = traversal[pos++];
  }
  layout.padding.assign(traversal.begin() + static_cast<long>(pos), traversal.end());
  layout.column_order = std::move(column_order);
  layout.validate();
  return layout;
}

std::vector<int> schema_order(const CodecSpec& spec) {
  std::vector<int> order(spec.schema.columns.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  return order;
}

}  // namespace

Layout baseline_layout(const CodecSpec& spec, int height, int width) {
  return place(spec, LayoutStrategy::Baseline, schema_order(spec),
               row_major_traversal(height, width), height, width);
}

Matrix association(const Table& table, std::vector<std::string>* warnings) {
  const Schema& schema = table.schema();
  const Eigen::Index n = table.rows();
  if (n == 0) throw DataError("association: empty table");
  const int m = static_cast<int>(schema.columns.size());

  // Member vectors per column: the column itself (numeric) or one indicator
  // per vocabulary entry (categorical). Standardize to zero mean, unit L2
  // norm so the Gram matrix holds Pearson r directly. Zero-variance members
  // are dropped; a column with no surviving member gets association 0.
  std::vector<int> first_member(m), member_count(m, 0);
  std::vector<Eigen::VectorXd> members;
  for (int c = 0; c < m; ++c) {
    first_member[c] = static_cast<int>(members.size());
    std::vector<Eigen::VectorXd> raw;
    if (schema.columns[c].kind == ColumnKind::Numeric) {
      raw.push_back(table.numeric_column(c));
    } else {
      const auto& codes = table.code_column(c);
      const int vocab = static_cast<int>(schema.columns[c].vocabulary.size());
      for (int v = 0; v < vocab; ++v) {
        Eigen::VectorXd ind = Eigen::VectorXd::Zero(n);
        for (Eigen::Index r = 0; r < n; ++r)
          if (codes[static_cast<size_t>(r)] == v) ind[r] = 1.0;
        raw.push_back(std::move(ind));
      }
    }
    for (auto& v : raw) {
      v.array() -= v.mean();
      const double norm = v.norm();
      if (norm <= 0.0) continue;  // constant member, no signal
      v /= norm;
      members.push_back(std::move(v));
      ++member_count[c];
    }
    if (member_count[c] == 0 && warnings)
      warnings->push_back("column '" + schema.columns[c].name +
                          "' has zero variance; association set to 0");
  }

  Matrix z(n, static_cast<Eigen::Index>(members.size()));
  for (size_t k = 0; k < members.size(); ++k) z.col(static_cast<Eigen::Index>(k)) = members[k];
  Matrix gram = z.transpose() * z;

  Matrix assoc = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    assoc(i, i) = 1.0;
    for (int j = i + 1; j < m; ++j) {
      double best = 0.0;
      for (int a = first_member[i]; a < first_member[i] + member_count[i]; ++a)
        for (int b = first_member[j]; b < first_member[j] + member_count[j]; ++b)
          best = std::max(best, std::abs(gram(a, b)));
      best = std::min(best, 1.0);  // guard rounding above 1
      assoc(i, j) = assoc(j, i) = best;
    }
  }
  if (!assoc.allFinite()) throw NumericError("association matrix has non-finite entries");
  return assoc;
}

std::vector<int> cluster_leaf_order(const Matrix& assoc, const std::vector<std::string>& names) {
  const int m = static_cast<int>(names.size());
  if (assoc.rows() != m || assoc.cols() != m)
    throw DataError("association matrix does not match column count");
  if (m == 0) return {};

  struct Cluster {
    std::vector<int> leaves;
    std::string least;  // lexicographically least member name
    int size = 1;
  };
  std::vector<Cluster> active;
  for (int i = 0; i < m; ++i) active.push_back({{i}, names[i], 1});

  // Pairwise average-linkage distances, updated by Lance–Williams.
  Matrix dist = Matrix::Ones(m, m) - assoc;

  while (active.size() > 1) {
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::string, std::string> best_key;
    for (size_t i = 0; i + 1 < active.size(); ++i)
      for (size_t j = i + 1; j < active.size(); ++j) {
        const double d = dist(static_cast<int>(i), static_cast<int>(j));
        std::pair<std::string, std::string> key(std::min(active[i].least, active[j].least),
                                                std::max(active[i].least, active[j].least));
        if (d < best || (d == best && key < best_key)) {
          best = d;
          best_key = key;
          bi = static_cast<int>(i);
          bj = static_cast<int>(j);
        }
      }

    Cluster& a = active[bi];
    Cluster& b = active[bj];
    // Children ordered by (size, least member name).
    const bool a_first = std::tie(a.size, a.least) <= std::tie(b.size, b.least);
    Cluster merged;
    const Cluster& first = a_first ? a : b;
    const Cluster& second = a_first ? b : a;
    merged.leaves = first.leaves;
    merged.leaves.insert(merged.leaves.end(), second.leaves.begin(), second.leaves.end());
    merged.least = std::min(a.least, b.least);
    merged.size = a.size + b.size;

    const int k = static_cast<int>(active.size());
    Matrix next = Matrix::Zero(k - 1, k - 1);
    std::vector<Cluster> remaining;
    std::vector<int> old_index;
    for (int i = 0; i < k; ++i)
      if (i != bi && i != bj) {
        old_index.push_back(i);
        remaining.push_back(std::move(active[i]));
      }
    const double wa = a.size, wb = b.size;
    for (size_t i = 0; i < remaining.size(); ++i) {
      for (size_t j = i + 1; j < remaining.size(); ++j)
        next(i, j) = next(j, i) = dist(old_index[i], old_index[j]);
      next(i, remaining.size()) = next(remaining.size(), i) =
          (wa * dist(old_index[i], bi) + wb * dist(old_index[i], bj)) / (wa + wb);
    }
    remaining.push_back(std::move(merged));
    active = std::move(remaining);
    dist = std::move(next);
  }
  return active.front().leaves;
}

Layout clustered_layout(const CodecSpec& spec, const Matrix& assoc, int height, int width) {
  std::vector<std::string> names;
  for (const auto& c : spec.schema.columns) names.push_back(c.name);
  return place(spec, LayoutStrategy::Clustered, cluster_leaf_order(assoc, names),
               snake_traversal(height, width), height, width);
}

std::string PlacementPlan::to_json_text() const {
  json j;
  json groups_j = json::array();
  for (const auto& g : groups) groups_j.push_back({{"name", g.name}, {"columns", g.columns}});
  j["groups"] = std::move(groups_j);
  return j.dump(2) + "\n";
}

PlacementPlan PlacementPlan::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("placement plan is not valid JSON: ") + e.what());
  }
  PlacementPlan plan;
  try {
    for (const auto& jg : j.at("groups")) {
      Group g;
      g.name = jg.at("name").get<std::string>();
      g.columns = jg.at("columns").get<std::vector<std::string>>();
      plan.groups.push_back(std::move(g));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed placement plan: ") + e.what());
  }
  return plan;
}

PlacementPlan PlacementPlan::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open placement plan: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

Layout manual_layout(const CodecSpec& spec, const PlacementPlan& plan, int height, int width) {
  std::vector<int> order;
  std::vector<char> used(spec.schema.columns.size(), 0);
  for (const auto& g : plan.groups)
    for (const auto& name : g.columns) {
      const int idx = spec.schema.column_index(name);
      if (idx < 0) throw DataError("placement plan references unknown column '" + name + "'");
      if (used[idx]) throw DataError("placement plan lists column '" + name + "' twice");
      used[idx] = 1;
      order.push_back(idx);
    }
  for (size_t i = 0; i < used.size(); ++i)
    if (!used[i])
      throw DataError("placement plan omits column '" + spec.schema.columns[i].name + "'");
  return place(spec, LayoutStrategy::Manual, std::move(order), snake_traversal(height, width),
               height, width);
}

}  // namespace tabdiff
