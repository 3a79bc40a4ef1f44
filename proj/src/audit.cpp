#include "tabdiff/audit.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace tabdiff {

using nlohmann::json;

namespace {

// --- small numeric helpers --------------------------------------------------

double median_of(std::vector<double> v) {
  if (v.empty()) throw DataError("median of an empty set");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Two-sample Kolmogorov-Smirnov statistic, exact sweep over the merged
// support.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  size_t i = 0, j = 0;
  double ks = 0.0;
  while (i < a.size() || j < b.size()) {
    const double ai = i < a.size() ? a[i] : std::numeric_limits<double>::infinity();
    const double bj = j < b.size() ? b[j] : std::numeric_limits<double>::infinity();
    const double v = std::min(ai, bj);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    ks = std::max(ks, std::abs(i / na - j / nb));
  }
  return ks;
}

double pearson(const Vector& x, const Vector& y) {
  const double mx = x.mean(), my = y.mean();
  const Eigen::ArrayXd dx = x.array() - mx, dy = y.array() - my;
  const double sx = std::sqrt(dx.square().sum()), sy = std::sqrt(dy.square().sum());
  if (sx == 0.0 || sy == 0.0) throw NumericError("pearson on a zero-variance column");
  return (dx * dy).sum() / (sx * sy);
}

bool zero_variance(const Vector& v) { return v.size() == 0 || v.minCoeff() == v.maxCoeff(); }

// Nearest-rank internal decile edges of a column (9 edges, possibly
// duplicated).
std::vector<double> decile_edges(const Vector& col) {
  std::vector<double> sorted(col.data(), col.data() + col.size());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<double> edges;
  edges.reserve(9);
  for (int k = 1; k <= 9; ++k) {
    const long idx = std::clamp<long>(static_cast<long>(std::ceil(0.1 * k * n)) - 1, 0,
                                      static_cast<long>(sorted.size()) - 1);
    edges.push_back(sorted[static_cast<size_t>(idx)]);
  }
  return edges;
}

int bin_of(const std::vector<double>& edges, double v) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
}

// Per-row discrete level of a column: category code, or decile bin against
// the supplied real-column edges.
std::vector<int> levels_of(const Table& t, int col, const std::vector<double>* edges, int* n_levels) {
  const ColumnSpec& spec = t.schema().columns[col];
  std::vector<int> out(static_cast<size_t>(t.rows()));
  if (spec.kind == ColumnKind::Categorical) {
    *n_levels = static_cast<int>(spec.vocabulary.size());
    const auto& codes = t.code_column(col);
    for (Eigen::Index r = 0; r < t.rows(); ++r) out[static_cast<size_t>(r)] = codes[static_cast<size_t>(r)];
  } else {
    *n_levels = 10;
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      out[static_cast<size_t>(r)] = bin_of(*edges, t.num(r, col));
  }
  return out;
}

double contingency_tv(const std::vector<int>& la, const std::vector<int>& lb, int na_levels,
                      const std::vector<int>& ra, const std::vector<int>& rb, int nb_levels) {
  // la/lb: per-row levels of the two columns in one table; ra/rb in the other.
  std::vector<double> p(static_cast<size_t>(na_levels) * nb_levels, 0.0);
  std::vector<double> q(p.size(), 0.0);
  for (size_t r = 0; r < la.size(); ++r)
    p[static_cast<size_t>(la[r]) * nb_levels + lb[r]] += 1.0 / static_cast<double>(la.size());
  for (size_t r = 0; r < ra.size(); ++r)
    q[static_cast<size_t>(ra[r]) * nb_levels + rb[r]] += 1.0 / static_cast<double>(ra.size());
  double tv = 0.0;
  for (size_t k = 0; k < p.size(); ++k) tv += std::abs(p[k] - q[k]);
  return 0.5 * tv;
}

void require_same_schema(const Table& real, const Table& synth) {
  const auto& a = real.schema().columns;
  const auto& b = synth.schema().columns;
  if (a.size() != b.size()) throw DataError("audit tables have different column counts");
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].kind != b[i].kind || a[i].vocabulary != b[i].vocabulary)
      throw DataError("audit tables disagree on column '" + a[i].name + "'");
  }
}

int required_column(const Table& t, const std::string& name, const char* what) {
  const int idx = t.schema().column_index(name);
  if (idx < 0)
    throw DataError(std::string(what) + " requires column '" + name + "'");
  return idx;
}

int vocab_code(const Schema& schema, int col, const std::string& entry) {
  const auto& vocab = schema.columns[col].vocabulary;
  for (size_t i = 0; i < vocab.size(); ++i)
    if (vocab[i] == entry) return static_cast<int>(i);
  return -1;
}

}  // namespace

// --- fidelity -----------------------------------------------------------------

double column_shape_score(const Table& real, const Table& synth, int col) {
  if (real.rows() == 0 || synth.rows() == 0) throw DataError("shape score over an empty column");
  const ColumnSpec& spec = real.schema().columns[col];
  if (spec.kind == ColumnKind::Numeric) {
    const Vector& a = real.numeric_column(col);
    const Vector& b = synth.numeric_column(col);
    return 1.0 - ks_statistic(std::vector<double>(a.data(), a.data() + a.size()),
                              std::vector<double>(b.data(), b.data() + b.size()));
  }
  const int vocab = static_cast<int>(spec.vocabulary.size());
  std::vector<double> p(static_cast<size_t>(vocab), 0.0), q(static_cast<size_t>(vocab), 0.0);
  for (int code : real.code_column(col)) p[static_cast<size_t>(code)] += 1.0 / real.rows();
  for (int code : synth.code_column(col)) q[static_cast<size_t>(code)] += 1.0 / synth.rows();
  double tv = 0.0;
  for (int k = 0; k < vocab; ++k) tv += std::abs(p[static_cast<size_t>(k)] - q[static_cast<size_t>(k)]);
  return 1.0 - 0.5 * tv;
}

std::optional<PairScore> pairwise_correlation_score(const Table& real, const Table& synth,
                                                    int col_a, int col_b,
                                                    std::vector<std::string>* warnings) {
  if (real.rows() == 0 || synth.rows() == 0) throw DataError("pairwise score over an empty table");
  const Schema& schema = real.schema();
  const ColumnSpec& sa = schema.columns[col_a];
  const ColumnSpec& sb = schema.columns[col_b];
  PairScore out;
  out.col_a = sa.name;
  out.col_b = sb.name;

  if (sa.kind == ColumnKind::Numeric && sb.kind == ColumnKind::Numeric) {
    out.method = "correlation_similarity";
    if (zero_variance(real.numeric_column(col_a)) || zero_variance(real.numeric_column(col_b)) ||
        zero_variance(synth.numeric_column(col_a)) || zero_variance(synth.numeric_column(col_b))) {
      if (warnings)
        warnings->push_back("pair (" + sa.name + ", " + sb.name +
                            ") skipped: zero-variance numeric column");
      return std::nullopt;
    }
    const double r_real = pearson(real.numeric_column(col_a), real.numeric_column(col_b));
    const double r_synth = pearson(synth.numeric_column(col_a), synth.numeric_column(col_b));
    out.score = 1.0 - std::abs(r_real - r_synth) / 2.0;
    return out;
  }

  out.method = "contingency_similarity";
  std::vector<double> edges_a, edges_b;
  if (sa.kind == ColumnKind::Numeric) edges_a = decile_edges(real.numeric_column(col_a));
  if (sb.kind == ColumnKind::Numeric) edges_b = decile_edges(real.numeric_column(col_b));
  int levels_a = 0, levels_b = 0;
  const std::vector<int> real_a = levels_of(real, col_a, &edges_a, &levels_a);
  const std::vector<int> real_b = levels_of(real, col_b, &edges_b, &levels_b);
  const std::vector<int> synth_a = levels_of(synth, col_a, &edges_a, &levels_a);
  const std::vector<int> synth_b = levels_of(synth, col_b, &edges_b, &levels_b);
  out.score = 1.0 - contingency_tv(real_a, real_b, levels_a, synth_a, synth_b, levels_b);
  return out;
}

FidelityScores fidelity(const Table& real, const Table& synth) {
  require_same_schema(real, synth);
  FidelityScores out;
  const int m = static_cast<int>(real.schema().columns.size());
  double shape_sum = 0.0;
  for (int c = 0; c < m; ++c) {
    ShapeScore s;
    s.column = real.schema().columns[c].name;
    s.method =
        real.schema().columns[c].kind == ColumnKind::Numeric ? "ks_complement" : "tv_complement";
    s.score = column_shape_score(real, synth, c);
    shape_sum += s.score;
    out.shapes.push_back(std::move(s));
  }
  out.column_shapes_mean = shape_sum / m;

  double pair_sum = 0.0;
  long pair_count = 0;
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) {
      auto score = pairwise_correlation_score(real, synth, a, b, &out.warnings);
      if (!score) continue;
      pair_sum += score->score;
      ++pair_count;
      out.pairs.push_back(std::move(*score));
    }
  if (pair_count == 0) throw DataError("no scorable column pairs");
  out.pairwise_mean = pair_sum / static_cast<double>(pair_count);
  out.overall = (out.column_shapes_mean + out.pairwise_mean) / 2.0;
  return out;
}

// --- semantic consistency -----------------------------------------------------

SemanticReport semantic_check(const Table& table, const SemanticBounds& bounds) {
  const int cap_gain = required_column(table, "capital-gain", "semantic check");
  const int cap_loss = required_column(table, "capital-loss", "semantic check");
  const int hours = required_column(table, "hours-per-week", "semantic check");
  const int sex = required_column(table, "sex", "semantic check");
  const int rel = required_column(table, "relationship", "semantic check");
  const int edu_num = required_column(table, "education-num", "semantic check");

  const Schema& schema = table.schema();
  const int female = vocab_code(schema, sex, "Female");
  const int male = vocab_code(schema, sex, "Male");
  const int husband = vocab_code(schema, rel, "Husband");
  const int wife = vocab_code(schema, rel, "Wife");

  SemanticReport report;
  report.n = table.rows();
  report.rules.resize(5);
  report.rules[0].id = "NegCapital";
  report.rules[1].id = "HoursRange";
  report.rules[2].id = "FemaleHusband";
  report.rules[3].id = "MaleWife";
  report.rules[4].id = "EduRange";

  std::vector<char> any(static_cast<size_t>(table.rows()), 0);
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    bool flags[5];
    flags[0] = table.num(r, cap_gain) < 0.0 || table.num(r, cap_loss) < 0.0;
    flags[1] = table.num(r, hours) < bounds.hours_min || table.num(r, hours) > bounds.hours_max;
    flags[2] = female >= 0 && husband >= 0 && table.code(r, sex) == female &&
               table.code(r, rel) == husband;
    flags[3] = male >= 0 && wife >= 0 && table.code(r, sex) == male && table.code(r, rel) == wife;
    flags[4] = table.num(r, edu_num) < bounds.edu_min || table.num(r, edu_num) > bounds.edu_max;
    for (int k = 0; k < 5; ++k)
      if (flags[k]) {
        report.rules[static_cast<size_t>(k)].rows.push_back(r);
        any[static_cast<size_t>(r)] = 1;
      }
  }
  for (auto& rule : report.rules) {
    rule.count = static_cast<long>(rule.rows.size());
    rule.rate = report.n ? static_cast<double>(rule.count) / static_cast<double>(report.n) : 0.0;
  }
  for (char f : any) report.any_count += f;
  report.any_rate =
      report.n ? static_cast<double>(report.any_count) / static_cast<double>(report.n) : 0.0;
  return report;
}

// --- TSTR -----------------------------------------------------------------------

namespace {

struct EncodedFeatures {
  Matrix x;  // n x (kept slots + intercept)
  Eigen::VectorXd y;
};

EncodedFeatures encode_for_classifier(const Table& t, const CodecSpec& codec, int income_col,
                                      int positive_code) {
  const Matrix full = encode_table(t, codec);
  const FeatureBlock& income = codec.blocks[static_cast<size_t>(income_col)];
  const int kept = codec.encoded_width - income.width;
  EncodedFeatures out;
  out.x.resize(t.rows(), kept + 1);
  int dst = 0;
  for (int s = 0; s < codec.encoded_width; ++s) {
    if (s >= income.offset && s < income.offset + income.width) continue;
    out.x.col(dst++) = full.col(s);
  }
  out.x.col(kept).setOnes();  // intercept
  out.y.resize(t.rows());
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    out.y[r] = t.code(r, income_col) == positive_code ? 1.0 : 0.0;
  return out;
}

}  // namespace

TSTRResult tstr(const Table& synth_train, const Table& real_test, uint64_t seed,
                const CodecSpec* codec) {
  if (synth_train.rows() == 0) throw DataError("empty training table");
  require_same_schema(synth_train, real_test);
  CodecSpec local;
  if (!codec) {
    local = fit_codec(real_test);
    codec = &local;
  }
  const int income_col = required_column(real_test, "income", "TSTR");
  const int positive = vocab_code(codec->schema, income_col, ">50K");
  if (positive < 0) throw DataError("income vocabulary lacks '>50K'");

  const EncodedFeatures train = encode_for_classifier(synth_train, *codec, income_col, positive);
  const EncodedFeatures test = encode_for_classifier(real_test, *codec, income_col, positive);

  TSTRResult result;
  result.seed = seed;
  result.train_rows = synth_train.rows();
  result.test_rows = real_test.rows();

  const Eigen::Index d = train.x.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  const double pos_share = train.y.mean();
  result.degenerate = (pos_share == 0.0 || pos_share == 1.0);

  if (result.degenerate) {
    // Majority constant classifier: an infinite intercept of the right sign.
    w[d - 1] = pos_share == 1.0 ? 1e6 : -1e6;
  } else {
    // Full-batch gradient descent with heavy-ball momentum; fixed budget.
    const int iters = 2000;
    const double lr = 0.5, mu = 0.9, l2 = 1e-4;
    const double n = static_cast<double>(train.x.rows());
    Eigen::VectorXd vel = Eigen::VectorXd::Zero(d);
    for (int it = 0; it < iters; ++it) {
      Eigen::VectorXd p = (train.x * w).unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
      Eigen::VectorXd g = train.x.transpose() * (p - train.y) / n;
      g.head(d - 1) += l2 * w.head(d - 1);
      vel = mu * vel - lr * g;
      w += vel;
    }
    if (!w.allFinite()) throw NumericError("classifier diverged");
  }

  const Eigen::VectorXd margin = test.x * w;
  for (Eigen::Index r = 0; r < margin.size(); ++r) {
    const bool pred_pos = margin[r] > 0.0;
    const bool true_pos = test.y[r] == 1.0;
    if (pred_pos && true_pos) ++result.tp;
    else if (pred_pos && !true_pos) ++result.fp;
    else if (!pred_pos && true_pos) ++result.fn;
    else ++result.tn;
  }

  const auto safe_div = [](double a, double b) { return b == 0.0 ? 0.0 : a / b; };
  const double n_test = static_cast<double>(result.tp + result.tn + result.fp + result.fn);
  result.accuracy = safe_div(static_cast<double>(result.tp + result.tn), n_test);
  result.precision_gt = safe_div(result.tp, static_cast<double>(result.tp + result.fp));
  result.recall_gt = safe_div(result.tp, static_cast<double>(result.tp + result.fn));
  result.f1_gt = safe_div(2.0 * result.precision_gt * result.recall_gt,
                          result.precision_gt + result.recall_gt);
  result.precision_le = safe_div(result.tn, static_cast<double>(result.tn + result.fn));
  result.recall_le = safe_div(result.tn, static_cast<double>(result.tn + result.fp));
  result.f1_le = safe_div(2.0 * result.precision_le * result.recall_le,
                          result.precision_le + result.recall_le);
  return result;
}

// --- disclosure -------------------------------------------------------------------

namespace {

// Per-row nearest-neighbor distances from `from` to `to` (optionally skipping
// the same-index pair for leave-one-out). Squared distances come from a
// chunked GEMM; the winning pair is re-measured exactly in double.
std::vector<double> nn_distances(const Matrix& from_d, const Matrix& to_d, bool loo) {
  const Eigen::Index n_from = from_d.rows();
  const Eigen::MatrixXf from = from_d.cast<float>();
  const Eigen::MatrixXf to = to_d.cast<float>();
  const Eigen::VectorXf from_sq = from.rowwise().squaredNorm();
  const Eigen::VectorXf to_sq = to.rowwise().squaredNorm();

  std::vector<double> out(static_cast<size_t>(n_from));
  const Eigen::Index chunk = 256;
  for (Eigen::Index lo = 0; lo < n_from; lo += chunk) {
    const Eigen::Index m = std::min(chunk, n_from - lo);
    Eigen::MatrixXf d2 = -2.0f * (from.middleRows(lo, m) * to.transpose());
    d2.colwise() += from_sq.segment(lo, m);
    d2.rowwise() += to_sq.transpose();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (loo) d2(i, lo + i) = std::numeric_limits<float>::infinity();
      Eigen::Index best = 0;
      d2.row(i).minCoeff(&best);
      out[static_cast<size_t>(lo + i)] = (from_d.row(lo + i) - to_d.row(best)).norm();
    }
  }
  return out;
}

}  // namespace

DisclosureReport disclosure(const Table& real, const Table& synth, const CodecSpec* codec) {
  require_same_schema(real, synth);
  if (real.rows() < 2) throw DataError("disclosure needs at least 2 real rows");
  if (synth.rows() == 0) throw DataError("disclosure needs at least 1 synthetic row");
  CodecSpec local;
  if (!codec) {
    local = fit_codec(real);
    codec = &local;
  }
  const Matrix er = encode_table(real, *codec);
  const Matrix es = encode_table(synth, *codec);

  const std::vector<double> dcr = nn_distances(es, er, false);
  const std::vector<double> loo = nn_distances(er, er, true);

  DisclosureReport report;
  report.n_synth = synth.rows();
  report.n_real = real.rows();
  report.min_dcr = *std::min_element(dcr.begin(), dcr.end());
  report.median_dcr = median_of(dcr);
  report.median_real_loo = median_of(loo);
  if (report.median_real_loo > 0.0)
    report.score = std::clamp(report.median_dcr / report.median_real_loo, 0.0, 1.0);
  else
    report.score = report.median_dcr == 0.0 ? 0.0 : 1.0;
  report.definition =
      "DCR = Euclidean distance in the encoded [0,1] feature space from a synthetic row to its "
      "nearest real record; score = median synthetic DCR / median real-to-real leave-one-out "
      "nearest-neighbor distance, clipped to [0,1]. 0 signals memorization, 1 signals distance "
      "from the real data.";
  return report;
}

// --- structural / diversity ---------------------------------------------------

StructuralReport structural_report(const Table& real, const Table& synth) {
  require_same_schema(real, synth);
  const int income = required_column(real, "income", "structural report");
  const int marital = required_column(real, "marital-status", "structural report");
  const int rel = required_column(real, "relationship", "structural report");
  const int edu_num = required_column(real, "education-num", "structural report");
  const int race = required_column(real, "race", "structural report");
  const int country = required_column(real, "native-country", "structural report");

  const Schema& schema = real.schema();
  const int gt50 = vocab_code(schema, income, ">50K");
  const int married = vocab_code(schema, marital, "Married-civ-spouse");
  const int husband = vocab_code(schema, rel, "Husband");
  const int white = vocab_code(schema, race, "White");
  const int usa = vocab_code(schema, country, "United-States");

  auto pct = [](const Table& t, auto&& flag) {
    if (t.rows() == 0) return 0.0;
    long count = 0;
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      if (flag(t, r)) ++count;
    return 100.0 * static_cast<double>(count) / static_cast<double>(t.rows());
  };

  StructuralReport report;
  auto add = [&](const std::string& name, auto&& flag) {
    report.rows.push_back({name, pct(real, flag), pct(synth, flag)});
  };
  add(">50K income", [&](const Table& t, Eigen::Index r) { return t.code(r, income) == gt50; });
  add("Married-civ-spouse",
      [&](const Table& t, Eigen::Index r) { return t.code(r, marital) == married; });
  add("Husband", [&](const Table& t, Eigen::Index r) { return t.code(r, rel) == husband; });
  add("Bachelors or higher",
      [&](const Table& t, Eigen::Index r) { return t.num(r, edu_num) >= 13.0; });
  add("White", [&](const Table& t, Eigen::Index r) { return t.code(r, race) == white; });
  add("Foreign-born", [&](const Table& t, Eigen::Index r) { return t.code(r, country) != usa; });
  return report;
}

// --- combined report ------------------------------------------------------------

namespace {

bool has_columns(const Table& t, std::initializer_list<const char*> names) {
  for (const char* name : names)
    if (t.schema().column_index(name) < 0) return false;
  return true;
}

// Published results of the full-scale study this toolkit models its battery
// on. Context only: a desk-scale from-scratch model is not expected to land
// on these numbers.
json reference_constants() {
  json ref;
  ref["units"] = "percent unless noted";
  ref["fidelity"] = {
      {"column_shapes", {{"baseline", 83.62}, {"clustered", 91.59}, {"manual", 90.42}}},
      {"pairwise_correlations", {{"baseline", 80.34}, {"clustered", 81.66}, {"manual", 77.85}}},
      {"overall", {{"baseline", 81.98}, {"clustered", 86.63}, {"manual", 84.14}}}};
  ref["tstr"] = {
      {"accuracy", {{"baseline", 77.0}, {"clustered", 78.5}, {"manual", 77.6}}},
      {"f1_le50k", {{"baseline", 0.869}, {"clustered", 0.87}, {"manual", 0.87}}},
      {"f1_gt50k", {{"baseline", 0.056}, {"clustered", 0.25}, {"manual", 0.16}}}};
  ref["semantic_error_rates"] = {
      {"FemaleHusband", {{"baseline", 10.28}, {"clustered", 12.61}, {"manual", 7.60}}},
      {"MaleWife", {{"baseline", 1.98}, {"clustered", 1.32}, {"manual", 3.84}}},
      {"EduRange", {{"baseline", 0.18}, {"clustered", 0.26}, {"manual", 0.22}}},
      {"NegCapital", {{"baseline", 58.64}, {"clustered", 0.00}, {"manual", 0.00}}},
      {"any_violation", {{"baseline", 70.08}, {"clustered", 14.17}, {"manual", 11.72}}}};
  ref["structural"] = {
      {">50K income", {{"real", 23.6}, {"clustered", 22.2}, {"manual", 14.7}, {"baseline", 14.7}}},
      {"Married-civ-spouse",
       {{"real", 44.8}, {"clustered", 46.7}, {"manual", 37.7}, {"baseline", 42.5}}},
      {"Husband", {{"real", 40.0}, {"clustered", 43.6}, {"manual", 33.6}, {"baseline", 40.3}}},
      {"Bachelors or higher",
       {{"real", 22.9}, {"clustered", 22.5}, {"manual", 16.2}, {"baseline", 17.8}}}};
  ref["diversity"] = {
      {"White", {{"real", 85.5}, {"clustered", 90.8}, {"manual", 87.8}, {"baseline", 86.2}}},
      {"Foreign-born", {{"real", 10.8}, {"clustered", 4.6}, {"manual", 5.5}, {"baseline", 7.8}}}};
  ref["disclosure_range"] = {0.61, 0.65};
  return ref;
}

std::vector<std::string> standard_notes() {
  return {
      "Reference constants come from the original full-scale study (pretrained-backbone model, "
      "full training budget); they are context columns, not targets for this desk-scale "
      "from-scratch run.",
      "Fidelity formulas: numeric shapes are 1 - the two-sample Kolmogorov-Smirnov statistic; "
      "categorical shapes are 1 - total-variation distance; numeric-numeric pairs are "
      "1 - |r_real - r_synth|/2 (Pearson); pairs involving a categorical column are 1 - "
      "total-variation distance between normalized contingency tables, numeric partners binned "
      "into deciles of the real column. Overall = mean(shape mean, pairwise mean).",
      "The reference study's checker describes six recurrent violation classes but enumerates "
      "five concrete rules; the five are implemented here and the sixth is left unidentified "
      "rather than invented.",
      "HoursRange bounds are [1, 99]; the reference study says only 'a realistic range' (its "
      "prose mentions flagging hours above one hundred). The bounds are configuration.",
      "TSTR classifier: logistic regression on the encoded features minus the income block, "
      "full-batch gradient descent (2000 iterations, learning rate 0.5, momentum 0.9, L2 1e-4), "
      "deterministic given the seed. The reference study does not name its classifier.",
      "The disclosure score is a distance-to-closest-record stand-in; the reference study's "
      "0.61-0.65 range comes from an unnamed formula and is not a comparable target.",
      "Known inconsistencies in the reference study's reported numbers, recorded as published "
      "and left unresolved: its prose gives a pairwise-correlation range of 78.9%-81.4% and a "
      "baseline overall score of 81.89%, while its summary table lists 77.85%-81.66% and "
      "81.98%.",
  };
}

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * fraction);
  return buf;
}

std::string num(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

AuditReport run_audit(const Table& real_train, const Table& real_test, const Table& synth,
                      const AuditOptions& opts, const CodecSpec* codec) {
  AuditReport report;
  report.layout_name = opts.layout_name;
  report.real_rows = real_train.rows();
  report.synth_rows = synth.rows();
  report.raw_rows = opts.raw_rows;
  report.dropped_rows = opts.dropped_rows;
  report.notes = standard_notes();

  if (opts.run_fidelity) report.fidelity = fidelity(real_train, synth);

  if (opts.run_semantic) {
    if (has_columns(synth, {"capital-gain", "capital-loss", "hours-per-week", "sex",
                            "relationship", "education-num"}))
      report.semantic = semantic_check(synth, opts.bounds);
    else
      report.notes.push_back("semantic section skipped: census rule columns absent from schema");
  }

  if (opts.run_tstr) {
    if (has_columns(real_test, {"income"}))
      report.tstr = tstr(synth, real_test, opts.seed, codec);
    else
      report.notes.push_back("TSTR section skipped: no income column in schema");
  }

  if (opts.run_disclosure) report.disclosure = disclosure(real_train, synth, codec);

  if (opts.run_structural) {
    if (has_columns(synth, {"income", "marital-status", "relationship", "education-num", "race",
                            "native-country"}))
      report.structural = structural_report(real_train, synth);
    else
      report.notes.push_back("structural section skipped: census feature columns absent");
  }

  return report;
}

std::string AuditReport::to_json() const {
  json j;
  j["layout"] = layout_name;
  j["rows"] = {{"real", real_rows},
               {"synthetic", synth_rows},
               {"real_raw", raw_rows},
               {"real_dropped", dropped_rows}};
  if (fidelity) {
    json jf;
    jf["column_shapes_mean"] = fidelity->column_shapes_mean;
    jf["pairwise_mean"] = fidelity->pairwise_mean;
    jf["overall"] = fidelity->overall;
    json shapes = json::array();
    for (const auto& s : fidelity->shapes)
      shapes.push_back({{"column", s.column}, {"method", s.method}, {"score", s.score}});
    jf["shapes"] = std::move(shapes);
    json pairs = json::array();
    for (const auto& p : fidelity->pairs)
      pairs.push_back(
          {{"columns", {p.col_a, p.col_b}}, {"method", p.method}, {"score", p.score}});
    jf["pairs"] = std::move(pairs);
    jf["warnings"] = fidelity->warnings;
    j["fidelity"] = std::move(jf);
  }
  if (semantic) {
    json js;
    js["n"] = semantic->n;
    json rules = json::array();
    for (const auto& r : semantic->rules)
      rules.push_back({{"id", r.id}, {"count", r.count}, {"rate", r.rate}, {"rows", r.rows}});
    js["rules"] = std::move(rules);
    js["any_count"] = semantic->any_count;
    js["any_rate"] = semantic->any_rate;
    j["semantic"] = std::move(js);
  }
  if (tstr) {
    j["tstr"] = {{"accuracy", tstr->accuracy},
                 {"precision_le50k", tstr->precision_le},
                 {"recall_le50k", tstr->recall_le},
                 {"f1_le50k", tstr->f1_le},
                 {"precision_gt50k", tstr->precision_gt},
                 {"recall_gt50k", tstr->recall_gt},
                 {"f1_gt50k", tstr->f1_gt},
                 {"confusion", {{"tp", tstr->tp}, {"tn", tstr->tn}, {"fp", tstr->fp}, {"fn", tstr->fn}}},
                 {"degenerate_single_class_train", tstr->degenerate},
                 {"train_rows", tstr->train_rows},
                 {"test_rows", tstr->test_rows},
                 {"seed", tstr->seed}};
  }
  if (disclosure) {
    j["disclosure"] = {{"min_dcr", disclosure->min_dcr},
                       {"median_dcr", disclosure->median_dcr},
                       {"median_real_loo", disclosure->median_real_loo},
                       {"score", disclosure->score},
                       {"definition", disclosure->definition},
                       {"n_synthetic", disclosure->n_synth},
                       {"n_real", disclosure->n_real}};
  }
  if (structural) {
    json rows = json::array();
    for (const auto& r : structural->rows)
      rows.push_back({{"feature", r.feature}, {"real_pct", r.real_pct}, {"synth_pct", r.synth_pct}});
    j["structural"] = {{"rows", std::move(rows)}};
  }
  j["reference_full_scale_study"] = reference_constants();
  j["notes"] = notes;
  return j.dump(2) + "\n";
}

std::string AuditReport::to_markdown() const {
  const bool known =
      layout_name == "baseline" || layout_name == "clustered" || layout_name == "manual";
  const json ref = reference_constants();
  auto ref_pct = [&](const char* section, const char* metric) -> std::string {
    if (!known) return "-";
    return num(ref.at(section).at(metric).at(layout_name).get<double>(), 2) + "%";
  };
  auto ref_num = [&](const char* section, const char* metric) -> std::string {
    if (!known) return "-";
    return num(ref.at(section).at(metric).at(layout_name).get<double>(), 3);
  };

  std::ostringstream md;
  md << "# Synthetic data audit\n\n";
  md << "- Layout: " << (layout_name.empty() ? std::string("(unspecified)") : layout_name) << "\n";
  md << "- Real rows: " << real_rows;
  if (raw_rows >= 0)
    md << " (raw " << raw_rows << ", dropped by missing-value policy " << dropped_rows << ")";
  md << "\n- Synthetic rows: " << synth_rows << "\n\n";
  md << "Reference columns labeled \"full-scale study\" restate the published run this battery "
        "mirrors; they are context, not targets (see notes).\n";

  if (fidelity) {
    md << "\n## Statistical fidelity\n\n";
    md << "| Metric | This run | Full-scale study (" << (known ? layout_name : "n/a") << ") |\n";
    md << "|---|---|---|\n";
    md << "| Column shapes mean | " << pct(fidelity->column_shapes_mean) << " | "
       << ref_pct("fidelity", "column_shapes") << " |\n";
    md << "| Pairwise mean | " << pct(fidelity->pairwise_mean) << " | "
       << ref_pct("fidelity", "pairwise_correlations") << " |\n";
    md << "| Overall | " << pct(fidelity->overall) << " | " << ref_pct("fidelity", "overall")
       << " |\n";
    md << "\n### Column shapes\n\n| Column | Method | Score |\n|---|---|---|\n";
    for (const auto& s : fidelity->shapes)
      md << "| " << s.column << " | " << s.method << " | " << pct(s.score) << " |\n";
    if (!fidelity->warnings.empty()) {
      md << "\nWarnings:\n";
      for (const auto& w : fidelity->warnings) md << "- " << w << "\n";
    }
  }

  if (semantic) {
    md << "\n## Semantic consistency\n\n";
    md << "| Rule | Violations | Rate | Full-scale study (" << (known ? layout_name : "n/a")
       << ") |\n|---|---|---|---|\n";
    for (const auto& r : semantic->rules) {
      std::string ref_cell = "-";
      if (known && ref.at("semantic_error_rates").contains(r.id))
        ref_cell = num(ref.at("semantic_error_rates").at(r.id).at(layout_name).get<double>(), 2) + "%";
      md << "| " << r.id << " | " << r.count << " | " << pct(r.rate) << " | " << ref_cell << " |\n";
    }
    md << "| any rule | " << semantic->any_count << " | " << pct(semantic->any_rate) << " | "
       << ref_pct("semantic_error_rates", "any_violation") << " |\n";
  }

  if (tstr) {
    md << "\n## Train on synthetic, test on real\n\n";
    md << "| Metric | This run | Full-scale study (" << (known ? layout_name : "n/a")
       << ") |\n|---|---|---|\n";
    md << "| Accuracy | " << pct(tstr->accuracy) << " | " << ref_pct("tstr", "accuracy") << " |\n";
    md << "| F1 (<=50K) | " << num(tstr->f1_le, 3) << " | " << ref_num("tstr", "f1_le50k")
       << " |\n";
    md << "| F1 (>50K) | " << num(tstr->f1_gt, 3) << " | " << ref_num("tstr", "f1_gt50k")
       << " |\n";
    md << "| Precision / recall (>50K) | " << num(tstr->precision_gt, 3) << " / "
       << num(tstr->recall_gt, 3) << " | - |\n";
    md << "\nConfusion (positive = >50K): tp=" << tstr->tp << " fp=" << tstr->fp
       << " fn=" << tstr->fn << " tn=" << tstr->tn << "\n";
    if (tstr->degenerate)
      md << "\n**Degenerate:** the synthetic training data contained a single income class; "
            "a majority classifier was evaluated instead.\n";
  }

  if (disclosure) {
    md << "\n## Disclosure\n\n";
    md << "- Min DCR: " << num(disclosure->min_dcr) << "\n";
    md << "- Median DCR: " << num(disclosure->median_dcr) << "\n";
    md << "- Median real leave-one-out NN distance: " << num(disclosure->median_real_loo) << "\n";
    md << "- Score: " << num(disclosure->score, 3)
       << " (full-scale study range 0.61-0.65 under a different, unnamed formula; not "
          "comparable)\n";
    md << "- Definition: " << disclosure->definition << "\n";
  }

  if (structural) {
    md << "\n## Structural and diversity features\n\n";
    md << "| Feature | Real | Synthetic | Full-scale study real |\n|---|---|---|---|\n";
    for (const auto& r : structural->rows) {
      std::string ref_cell = "-";
      for (const char* section : {"structural", "diversity"})
        if (ref.at(section).contains(r.feature))
          ref_cell = num(ref.at(section).at(r.feature).at("real").get<double>(), 1) + "%";
      md << "| " << r.feature << " | " << num(r.real_pct, 2) << "% | " << num(r.synth_pct, 2)
         << "% | " << ref_cell << " |\n";
    }
  }

  md << "\n## Notes\n\n";
  for (const auto& n : notes) md << "- " << n << "\n";
  return md.str();
}

}  // namespace tabdiff
