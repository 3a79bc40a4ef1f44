#include "tabdiff/schema.hpp"

#include "tabdiff/hash.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace tabdiff {

using nlohmann::json;

std::string hex64(uint64_t v) {
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[v & 0xf];
    v >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for hashing: " + path);
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a64(std::string_view(buf, static_cast<size_t>(in.gcount())), h);
    if (!in) break;
  }
  return h;
}

int Schema::column_index(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return static_cast<int>(i);
  return -1;
}

const ColumnSpec& Schema::column(const std::string& name) const {
  int idx = column_index(name);
  if (idx < 0) throw DataError("schema has no column named '" + name + "'");
  return columns[idx];
}

void Schema::validate() const {
  if (columns.empty()) throw DataError("schema declares no columns");
  std::unordered_set<std::string> seen;
  for (const auto& c : columns) {
    if (c.name.empty()) throw DataError("schema column with empty name");
    if (!seen.insert(c.name).second) throw DataError("duplicate column name '" + c.name + "'");
    if (c.kind == ColumnKind::Numeric) {
      if (c.valid_range && c.valid_range->first > c.valid_range->second)
        throw DataError("column '" + c.name + "' has malformed range [" +
                        std::to_string(c.valid_range->first) + ", " +
                        std::to_string(c.valid_range->second) + "]");
      if (!c.vocabulary.empty())
        throw DataError("numeric column '" + c.name + "' declares a vocabulary");
    } else {
      if (c.vocabulary_declared) {
        if (c.vocabulary.empty())
          throw DataError("categorical column '" + c.name + "' declares an empty vocabulary");
        std::unordered_set<std::string> vs;
        for (const auto& v : c.vocabulary)
          if (!vs.insert(v).second)
            throw DataError("column '" + c.name + "' has duplicate vocabulary entry '" + v + "'");
      }
    }
  }
}

Schema parse_schema(const std::string& config_text) {
  json doc;
  try {
    doc = json::parse(config_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("schema config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_array())
    throw DataError("schema config must be an object with a \"columns\" array");

  Schema schema;
  for (const auto& jc : doc["columns"]) {
    ColumnSpec c;
    if (!jc.contains("name") || !jc["name"].is_string())
      throw DataError("schema column without a string \"name\"");
    c.name = jc["name"].get<std::string>();
    std::string kind = jc.value("kind", "");
    if (kind == "numeric") {
      c.kind = ColumnKind::Numeric;
    } else if (kind == "categorical") {
      c.kind = ColumnKind::Categorical;
    } else {
      throw DataError("column '" + c.name + "' has unknown kind '" + kind + "'");
    }
    c.integer = jc.value("integer", false);
    if (jc.contains("range")) {
      const auto& r = jc["range"];
      if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
        throw DataError("column '" + c.name + "' has malformed range");
      c.valid_range = {r[0].get<double>(), r[1].get<double>()};
    }
    if (jc.contains("vocabulary")) {
      for (const auto& v : jc["vocabulary"]) c.vocabulary.push_back(v.get<std::string>());
      c.vocabulary_declared = true;
    }
    schema.columns.push_back(std::move(c));
  }
  schema.validate();
  return schema;
}

Schema load_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schema(ss.str());
}

std::string schema_to_config(const Schema& schema) {
  json cols = json::array();
  for (const auto& c : schema.columns) {
    json jc;
    jc["name"] = c.name;
    jc["kind"] = c.kind == ColumnKind::Numeric ? "numeric" : "categorical";
    if (c.kind == ColumnKind::Numeric) {
      jc["integer"] = c.integer;
      if (c.valid_range) jc["range"] = {c.valid_range->first, c.valid_range->second};
    } else if (c.vocabulary_declared) {
      jc["vocabulary"] = c.vocabulary;
    }
    cols.push_back(std::move(jc));
  }
  json doc;
  doc["columns"] = std::move(cols);
  return doc.dump(2) + "\n";
}

Table::Table(Schema schema) : schema_(std::move(schema)) {
  schema_.validate();
  numeric_.resize(schema_.columns.size());
  numeric_buf_.resize(schema_.columns.size());
  codes_.resize(schema_.columns.size());
}

void Table::append_row(const std::vector<double>& nums, const std::vector<int>& codes) {
  for (size_t c = 0; c < schema_.columns.size(); ++c) {
    if (schema_.columns[c].kind == ColumnKind::Numeric) {
      numeric_buf_[c].push_back(nums[c]);
    } else {
      codes_[c].push_back(codes[c]);
    }
  }
  ++n_rows_;
}

void Table::reserve(Eigen::Index n) {
  for (size_t c = 0; c < schema_.columns.size(); ++c) {
    if (schema_.columns[c].kind == ColumnKind::Numeric)
      numeric_buf_[c].reserve(static_cast<size_t>(n));
    else
      codes_[c].reserve(static_cast<size_t>(n));
  }
}

void Table::finalize() {
  for (size_t c = 0; c < schema_.columns.size(); ++c) {
    if (schema_.columns[c].kind == ColumnKind::Numeric) {
      numeric_[c] = Eigen::Map<const Vector>(numeric_buf_[c].data(),
                                             static_cast<Eigen::Index>(numeric_buf_[c].size()));
      numeric_buf_[c].clear();
      numeric_buf_[c].shrink_to_fit();
    }
  }
}

Table Table::head(Eigen::Index n) const {
  n = std::min(n, n_rows_);
  Table out(schema_);
  out.reserve(n);
  std::vector<double> nums(schema_.columns.size(), 0.0);
  std::vector<int> codes(schema_.columns.size(), 0);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (size_t c = 0; c < schema_.columns.size(); ++c) {
      if (schema_.columns[c].kind == ColumnKind::Numeric)
        nums[c] = num(r, static_cast<int>(c));
      else
        codes[c] = code(r, static_cast<int>(c));
    }
    out.append_row(nums, codes);
  }
  out.finalize();
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return cells;
}

}  // namespace

Table load_table(const std::string& csv_path, const Schema& schema, const CleaningPolicy& policy,
                 bool header) {
  return load_table(csv_path, schema, policy, header, nullptr);
}

Table load_table(const std::string& csv_path, const Schema& schema, const CleaningPolicy& policy,
                 bool header, LoadStats* stats) {
  schema.validate();
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open CSV file: " + csv_path);

  const size_t n_cols = schema.columns.size();
  std::vector<int> file_to_schema(n_cols);
  for (size_t i = 0; i < n_cols; ++i) file_to_schema[i] = static_cast<int>(i);

  std::string line;
  long line_no = 0;
  bool header_pending = header;

  // Local parse buffers; the Table is constructed after fitted vocabularies
  // have been sorted and codes remapped.
  std::vector<std::vector<double>> num_buf(n_cols);
  std::vector<std::vector<int>> code_buf(n_cols);
  std::vector<std::vector<std::string>> vocab(n_cols);
  std::vector<std::unordered_map<std::string, int>> vocab_lookup(n_cols);
  for (size_t c = 0; c < n_cols; ++c) {
    if (schema.columns[c].kind != ColumnKind::Categorical) continue;
    vocab[c] = schema.columns[c].vocabulary;
    for (size_t v = 0; v < vocab[c].size(); ++v)
      vocab_lookup[c][vocab[c][v]] = static_cast<int>(v);
  }

  long raw_rows = 0, dropped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '|') continue;  // blank or comment line

    auto cells = split_csv_line(sv);
    if (header_pending) {
      header_pending = false;
      if (cells.size() != n_cols)
        throw DataError(csv_path + ": header has " + std::to_string(cells.size()) +
                        " columns, schema has " + std::to_string(n_cols));
      std::vector<int> mapping(n_cols, -1);
      std::vector<bool> used(n_cols, false);
      for (size_t i = 0; i < n_cols; ++i) {
        int idx = schema.column_index(std::string(cells[i]));
        if (idx < 0 || used[idx])
          throw DataError(csv_path + ": header column '" + std::string(cells[i]) +
                          "' does not match the schema");
        mapping[i] = idx;
        used[idx] = true;
      }
      file_to_schema = mapping;
      continue;
    }

    ++raw_rows;
    if (cells.size() != n_cols)
      throw DataError(csv_path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(n_cols) + " cells, got " + std::to_string(cells.size()));

    bool incomplete = false;
    for (const auto& cell : cells)
      if (cell == "?") {
        incomplete = true;
        break;
      }
    if (incomplete) {
      if (policy.missing == MissingPolicy::Error)
        throw DataError(csv_path + ":" + std::to_string(line_no) + ": missing-value sentinel");
      ++dropped;
      continue;
    }

    for (size_t i = 0; i < n_cols; ++i) {
      const int c = file_to_schema[i];
      const ColumnSpec& spec = schema.columns[c];
      std::string_view cell = cells[i];
      if (spec.kind == ColumnKind::Numeric) {
        double v = 0.0;
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || p != cell.data() + cell.size())
          throw DataError(csv_path + ":" + std::to_string(line_no) + ": unparseable numeric cell '" +
                          std::string(cell) + "' in column '" + spec.name + "'");
        num_buf[c].push_back(v);
      } else {
        // normalize UCI test-split label variant: strip one trailing '.'
        if (!cell.empty() && cell.back() == '.') cell.remove_suffix(1);
        std::string value(cell);
        auto it = vocab_lookup[c].find(value);
        if (it == vocab_lookup[c].end()) {
          if (spec.vocabulary_declared && !policy.extend_declared_vocabulary)
            throw DataError(csv_path + ":" + std::to_string(line_no) + ": unknown category '" +
                            value + "' in column '" + spec.name + "'");
          int new_code = static_cast<int>(vocab[c].size());
          vocab[c].push_back(value);
          it = vocab_lookup[c].emplace(std::move(value), new_code).first;
        }
        code_buf[c].push_back(it->second);
      }
    }
  }

  if (header && header_pending) throw DataError(csv_path + ": empty file (no header row)");

  // Fitted vocabularies were built in first-seen order; sort them
  // lexicographically and remap the provisional codes.
  Schema fitted = schema;
  for (size_t c = 0; c < n_cols; ++c) {
    const ColumnSpec& spec = schema.columns[c];
    if (spec.kind != ColumnKind::Categorical) continue;
    if (vocab[c].empty())
      throw DataError("categorical column '" + spec.name + "' has no values after cleaning");
    if (!spec.vocabulary_declared || policy.extend_declared_vocabulary) {
      std::vector<std::string> sorted = vocab[c];
      if (!spec.vocabulary_declared) std::sort(sorted.begin(), sorted.end());
      std::unordered_map<std::string, int> new_code;
      for (size_t v = 0; v < sorted.size(); ++v) new_code[sorted[v]] = static_cast<int>(v);
      std::vector<int> remap(vocab[c].size());
      for (size_t v = 0; v < vocab[c].size(); ++v) remap[v] = new_code[vocab[c][v]];
      for (auto& code : code_buf[c]) code = remap[code];
      vocab[c] = std::move(sorted);
    }
    fitted.columns[c].vocabulary = vocab[c];
  }

  Table table(fitted);
  const long n_rows = raw_rows - dropped;
  table.reserve(n_rows);
  std::vector<double> nums(n_cols, 0.0);
  std::vector<int> codes(n_cols, 0);
  for (long r = 0; r < n_rows; ++r) {
    for (size_t c = 0; c < n_cols; ++c) {
      if (schema.columns[c].kind == ColumnKind::Numeric)
        nums[c] = num_buf[c][static_cast<size_t>(r)];
      else
        codes[c] = code_buf[c][static_cast<size_t>(r)];
    }
    table.append_row(nums, codes);
  }
  table.finalize();
  if (stats) {
    stats->raw_rows = raw_rows;
    stats->dropped_rows = dropped;
  }
  return table;
}

std::string format_numeric_cell(double v, bool integer) {
  char buf[32];
  if (integer) {
    long long iv = static_cast<long long>(v);
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), iv);
    (void)ec;
    return std::string(buf, p);
  }
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

void write_csv(const Table& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output CSV: " + path);
  const Schema& s = table.schema();
  for (size_t c = 0; c < s.columns.size(); ++c) {
    if (c) out << ',';
    out << s.columns[c].name;
  }
  out << '\n';
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    for (size_t c = 0; c < s.columns.size(); ++c) {
      if (c) out << ',';
      if (s.columns[c].kind == ColumnKind::Numeric)
        out << format_numeric_cell(table.num(r, static_cast<int>(c)), s.columns[c].integer);
      else
        out << table.cat(r, static_cast<int>(c));
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing CSV: " + path);
}

}  // namespace tabdiff
