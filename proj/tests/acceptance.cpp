// Acceptance battery: nine end-to-end checks with stated tolerances. Each
// check prints exactly one PASS/FAIL line with its measured values, and the
// process exit status is the number of failed checks, so `ctest` fails iff
// any criterion fails.
//
// The battery is self-contained: it generates its own data under a scratch
// directory, recomputes every audited statistic with independent brute-force
// oracles where a criterion demands agreement, and invokes the installed CLI
// binary where a criterion is about on-disk artifacts.

#include "test_util.hpp"

#include "tabdiff/audit.hpp"
#include "tabdiff/codec.hpp"
#include "tabdiff/common.hpp"
#include "tabdiff/datagen.hpp"
#include "tabdiff/diffusion.hpp"
#include "tabdiff/layout.hpp"
#include "tabdiff/pipeline.hpp"
#include "tabdiff/rng.hpp"
#include "tabdiff/schema.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <sys/wait.h>
#include <utility>
#include <vector>

using namespace tabdiff;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

std::string strf(const char* format, ...) {
  va_list args;
  va_start(args, format);
  va_list copy;
  va_copy(copy, args);
  const int n = std::vsnprintf(nullptr, 0, format, copy);
  va_end(copy);
  std::string s(static_cast<size_t>(n > 0 ? n : 0), '\0');
  std::vsnprintf(s.data(), s.size() + 1, format, args);
  va_end(args);
  return s;
}

void report(int idx, const char* label, bool pass, const std::string& detail) {
  if (!pass) ++g_failures;
  std::printf("%s criterion %d (%s): %s\n", pass ? "PASS" : "FAIL", idx, label, detail.c_str());
  std::fflush(stdout);
}

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void run_criterion(int idx, const char* label,
                   const std::function<std::pair<bool, std::string>()>& body) {
  try {
    auto [ok, detail] = body();
    report(idx, label, ok, detail);
  } catch (const std::exception& e) {
    report(idx, label, false, strf("unexpected exception: %s", e.what()));
  }
}

// --- shared data ------------------------------------------------------------

struct Env {
  testutil::TempDir dir;
  std::string census_schema_path;
  std::string census_train_csv;
  std::string census_test_csv;
  datagen::CensusStats train_stats;
  LoadStats train_load;
  Table census_train;  // cleaned
  Table census_test;   // cleaned

  Env() {
    census_schema_path = dir.file("census_schema.json");
    census_train_csv = dir.file("census_train.csv");
    census_test_csv = dir.file("census_test.csv");
    testutil::write_file(census_schema_path, datagen::census_schema_config());

    datagen::CensusOptions train_opts;  // 32561 rows, seed 7
    train_stats = datagen::write_census_csv(census_train_csv, train_opts);

    datagen::CensusOptions test_opts;
    test_opts.rows = 16281;
    test_opts.test_split = true;
    datagen::write_census_csv(census_test_csv, test_opts);

    const Schema schema = datagen::census_schema();
    census_train = load_table(census_train_csv, schema, CleaningPolicy{}, true, &train_load);
    census_test = load_table(census_test_csv, schema);
  }
};

int vocab_index(const Schema& schema, const std::string& column, const std::string& value) {
  const auto& vocab = schema.column(column).vocabulary;
  const auto it = std::find(vocab.begin(), vocab.end(), value);
  return it == vocab.end() ? -1 : static_cast<int>(it - vocab.begin());
}

// --- criterion 1: codec roundtrip -------------------------------------------

std::pair<bool, std::string> criterion1(const Env& env) {
  const auto t0 = Clock::now();
  const Table& t = env.census_train;
  const CodecSpec codec = fit_codec(t);
  const Layout layout = baseline_layout(codec);
  const Schema& schema = t.schema();

  long cat_bad = 0, int_bad = 0, int_cells = 0, cat_cells = 0;
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    const Grid grid = vector_to_grid(encode_row(t, r, codec), layout);
    const DecodedRow dec = grid_to_row(grid, layout, codec);
    for (size_t c = 0; c < schema.size(); ++c) {
      if (schema.columns[c].kind == ColumnKind::Numeric) {
        if (schema.columns[c].integer) {
          ++int_cells;
          if (dec.nums[c] != t.num(r, static_cast<int>(c))) ++int_bad;
        }
      } else {
        ++cat_cells;
        if (dec.codes[c] != t.code(r, static_cast<int>(c))) ++cat_bad;
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = cat_bad == 0 && int_bad == 0 && secs < 30.0;
  return {pass, strf("%lld rows; categorical cells exact %ld/%ld, integer cells exact %ld/%ld; "
                     "%.1fs (limit 30s)",
                     static_cast<long long>(t.rows()), cat_cells - cat_bad, cat_cells,
                     int_cells - int_bad, int_cells, secs)};
}

// --- criterion 2: fidelity identity + brute-force score oracles --------------

double cdf_at(const std::vector<double>& v, double x) {
  long c = 0;
  for (double d : v)
    if (d <= x) ++c;
  return static_cast<double>(c) / static_cast<double>(v.size());
}

double ks_complement_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  double gap = 0.0;
  for (double x : pts) gap = std::max(gap, std::fabs(cdf_at(a, x) - cdf_at(b, x)));
  return 1.0 - gap;
}

double tv_complement_oracle(const std::vector<int>& a, const std::vector<int>& b, int k) {
  std::vector<double> pa(static_cast<size_t>(k), 0.0), pb(static_cast<size_t>(k), 0.0);
  for (int c : a) pa[static_cast<size_t>(c)] += 1.0 / static_cast<double>(a.size());
  for (int c : b) pb[static_cast<size_t>(c)] += 1.0 / static_cast<double>(b.size());
  double tv = 0.0;
  for (int i = 0; i < k; ++i) tv += std::fabs(pa[static_cast<size_t>(i)] - pb[static_cast<size_t>(i)]);
  return 1.0 - 0.5 * tv;
}

double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Nearest-rank decile edges of the real column; values lying on an edge bin
// upward, matching half-open [edge, next) bins.
std::array<double, 9> decile_edges_oracle(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::array<double, 9> edges{};
  const long n = static_cast<long>(v.size());
  for (int k = 1; k <= 9; ++k) {
    long idx = static_cast<long>(std::ceil(0.1 * k * static_cast<double>(n))) - 1;
    idx = std::clamp<long>(idx, 0, n - 1);
    edges[static_cast<size_t>(k - 1)] = v[static_cast<size_t>(idx)];
  }
  return edges;
}

int bin_oracle(double x, const std::array<double, 9>& edges) {
  int b = 0;
  while (b < 9 && x >= edges[static_cast<size_t>(b)]) ++b;
  return b;
}

double contingency_complement_oracle(const std::vector<int>& ra, const std::vector<int>& rb,
                                     const std::vector<int>& sa, const std::vector<int>& sb,
                                     int na, int nb) {
  std::vector<double> pr(static_cast<size_t>(na * nb), 0.0), ps(static_cast<size_t>(na * nb), 0.0);
  for (size_t i = 0; i < ra.size(); ++i)
    pr[static_cast<size_t>(ra[i] * nb + rb[i])] += 1.0 / static_cast<double>(ra.size());
  for (size_t i = 0; i < sa.size(); ++i)
    ps[static_cast<size_t>(sa[i] * nb + sb[i])] += 1.0 / static_cast<double>(sa.size());
  double tv = 0.0;
  for (size_t i = 0; i < pr.size(); ++i) tv += std::fabs(pr[i] - ps[i]);
  return 1.0 - 0.5 * tv;
}

std::vector<double> numeric_values(const Table& t, int col) {
  std::vector<double> v(static_cast<size_t>(t.rows()));
  for (Eigen::Index r = 0; r < t.rows(); ++r) v[static_cast<size_t>(r)] = t.num(r, col);
  return v;
}

Schema mixed_fixture_schema() {
  return parse_schema(R"({"columns": [
    {"name": "u", "kind": "numeric"},
    {"name": "v", "kind": "numeric", "integer": true},
    {"name": "c", "kind": "categorical", "vocabulary": ["a", "b", "c"]},
    {"name": "d", "kind": "categorical", "vocabulary": ["p", "q"]}
  ]})");
}

Table mixed_fixture_table(const Schema& schema, long rows, uint64_t seed, bool shifted) {
  Table t(schema);
  CounterRng rng(seed, {CounterRng::label("accept-fixture")});
  for (long r = 0; r < rows; ++r) {
    const double u = shifted ? 0.4 + 1.3 * rng.normal() : rng.normal();
    const double v = static_cast<double>(rng.uniform_index(shifted ? 9 : 12));
    const int c = static_cast<int>(rng.uniform_index(3));
    const int d = static_cast<int>(rng.uniform_index(2));
    t.append_row({u, v, 0.0, 0.0}, {0, 0, c, d});
  }
  t.finalize();
  return t;
}

std::pair<bool, std::string> criterion2(const Env& env) {
  const FidelityScores self = fidelity(env.census_train, env.census_train);
  const bool identity_ok = self.overall == 1.0;

  const Schema schema = mixed_fixture_schema();
  const int kNumericBins = 10;
  double max_diff = 0.0;
  long comparisons = 0;
  for (int k = 0; k < 20; ++k) {
    const Table real =
        mixed_fixture_table(schema, 60 + 7 * k, 1000 + static_cast<uint64_t>(k), false);
    const Table synth =
        mixed_fixture_table(schema, 50 + 5 * k, 2000 + static_cast<uint64_t>(k), true);

    // per-row cell index of each column under the real table's decile edges
    std::vector<std::vector<int>> real_cells(4), synth_cells(4);
    std::vector<int> dims(4, 0);
    for (int c = 0; c < 4; ++c) {
      if (schema.columns[static_cast<size_t>(c)].kind == ColumnKind::Numeric) {
        const auto edges = decile_edges_oracle(numeric_values(real, c));
        for (Eigen::Index r = 0; r < real.rows(); ++r)
          real_cells[static_cast<size_t>(c)].push_back(bin_oracle(real.num(r, c), edges));
        for (Eigen::Index r = 0; r < synth.rows(); ++r)
          synth_cells[static_cast<size_t>(c)].push_back(bin_oracle(synth.num(r, c), edges));
        dims[static_cast<size_t>(c)] = kNumericBins;
      } else {
        real_cells[static_cast<size_t>(c)] = real.code_column(c);
        synth_cells[static_cast<size_t>(c)] = synth.code_column(c);
        dims[static_cast<size_t>(c)] =
            static_cast<int>(schema.columns[static_cast<size_t>(c)].vocabulary.size());
      }
    }

    for (int c = 0; c < 4; ++c) {
      const double got = column_shape_score(real, synth, c);
      double want = 0.0;
      if (schema.columns[static_cast<size_t>(c)].kind == ColumnKind::Numeric)
        want = ks_complement_oracle(numeric_values(real, c), numeric_values(synth, c));
      else
        want = tv_complement_oracle(real.code_column(c), synth.code_column(c),
                                    dims[static_cast<size_t>(c)]);
      max_diff = std::max(max_diff, std::fabs(got - want));
      ++comparisons;
    }
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        const auto got = pairwise_correlation_score(real, synth, a, b);
        if (!got) return {false, strf("fixture %d pair (%d,%d) unexpectedly unscorable", k, a, b)};
        double want = 0.0;
        const bool both_numeric =
            schema.columns[static_cast<size_t>(a)].kind == ColumnKind::Numeric &&
            schema.columns[static_cast<size_t>(b)].kind == ColumnKind::Numeric;
        if (both_numeric) {
          const double rr = pearson_oracle(numeric_values(real, a), numeric_values(real, b));
          const double rs = pearson_oracle(numeric_values(synth, a), numeric_values(synth, b));
          want = 1.0 - std::fabs(rr - rs) / 2.0;
        } else {
          want = contingency_complement_oracle(
              real_cells[static_cast<size_t>(a)], real_cells[static_cast<size_t>(b)],
              synth_cells[static_cast<size_t>(a)], synth_cells[static_cast<size_t>(b)],
              dims[static_cast<size_t>(a)], dims[static_cast<size_t>(b)]);
        }
        max_diff = std::max(max_diff, std::fabs(got->score - want));
        ++comparisons;
      }
    }
  }

  const bool oracle_ok = max_diff <= 1e-9;
  return {identity_ok && oracle_ok,
          strf("self-fidelity overall=%.17g (want exactly 1); %ld oracle comparisons over 20 "
               "fixture pairs, max |Δ|=%.3g (tol 1e-9)",
               self.overall, comparisons, max_diff)};
}

// --- criterion 3: rule checker vs hand-counted fixtures ----------------------

Schema rule_fixture_schema() {
  return parse_schema(R"({"columns": [
    {"name": "capital-gain", "kind": "numeric"},
    {"name": "capital-loss", "kind": "numeric"},
    {"name": "hours-per-week", "kind": "numeric"},
    {"name": "education-num", "kind": "numeric"},
    {"name": "sex", "kind": "categorical", "vocabulary": ["Female", "Male"]},
    {"name": "relationship", "kind": "categorical",
     "vocabulary": ["Husband", "Not-in-family", "Wife"]}
  ]})");
}

constexpr int kFemale = 0, kMale = 1;
constexpr int kHusband = 0, kNotInFamily = 1, kWife = 2;

struct RuleExpect {
  long neg = 0, hours = 0, fh = 0, mw = 0, edu = 0, any = 0;
};

const SemanticRule& rule_by_id(const SemanticReport& rep, const std::string& id) {
  for (const auto& r : rep.rules)
    if (r.id == id) return r;
  throw DataError("rule id missing from report: " + id);
}

std::pair<bool, std::string> criterion3(const Env& env) {
  const Schema schema = rule_fixture_schema();
  struct Fixture {
    Table table;
    RuleExpect want;
  };
  std::vector<Fixture> fixtures;
  auto build = [&](const std::vector<std::array<double, 6>>& rows, RuleExpect want) {
    Table t(schema);
    for (const auto& r : rows)
      t.append_row({r[0], r[1], r[2], r[3], 0.0, 0.0},
                   {0, 0, 0, 0, static_cast<int>(r[4]), static_cast<int>(r[5])});
    t.finalize();
    fixtures.push_back({std::move(t), want});
  };
  const double F = kFemale, M = kMale, H = kHusband, N = kNotInFamily, W = kWife;

  // 1: all clean
  build({{100, 0, 40, 10, M, N}, {0, 50, 20, 5, F, W}, {5, 5, 60, 16, M, H}}, {});
  // 2: one negative capital-gain
  build({{-1, 0, 40, 10, M, N}, {0, 0, 40, 10, F, N}, {3, 0, 40, 10, M, H}},
        {1, 0, 0, 0, 0, 1});
  // 3: two rows with negative capital fields (one has both negative)
  build({{0, -5, 40, 10, M, N}, {-2, -3, 40, 10, F, N}, {0, 0, 40, 10, M, N},
         {1, 1, 40, 10, F, W}},
        {2, 0, 0, 0, 0, 2});
  // 4: hours below and above the valid range
  build({{0, 0, 0, 10, M, N}, {0, 0, 100, 10, F, N}, {0, 0, 50, 10, M, N}},
        {0, 2, 0, 0, 0, 2});
  // 5: hours exactly on the [1, 99] boundaries are clean
  build({{0, 0, 1, 10, M, N}, {0, 0, 99, 10, F, N}}, {});
  // 6: three Female+Husband rows among clean company
  build({{0, 0, 40, 10, F, H}, {0, 0, 40, 10, F, H}, {0, 0, 40, 10, F, H},
         {0, 0, 40, 10, M, H}, {0, 0, 40, 10, F, W}},
        {0, 0, 3, 0, 0, 3});
  // 7: two Male+Wife rows
  build({{0, 0, 40, 10, M, W}, {0, 0, 40, 10, M, W}, {0, 0, 40, 10, F, W},
         {0, 0, 40, 10, M, H}},
        {0, 0, 0, 2, 0, 2});
  // 8: education-num outside [1, 16]; the boundaries themselves are clean
  build({{0, 0, 40, 0, M, N}, {0, 0, 40, 17, F, N}, {0, 0, 40, 1, M, N},
         {0, 0, 40, 16, F, N}},
        {0, 0, 0, 0, 2, 2});
  // 9: one row violating four rules at once still counts once in the union
  build({{-1, -1, 200, 0, F, H}, {0, 0, 40, 10, M, N}}, {1, 1, 1, 0, 1, 1});
  // 10: mixed tally across every rule
  build({{-1, 0, 40, 10, M, N},   // NegCapital
         {0, -1, 0, 10, F, N},    // NegCapital + HoursRange
         {0, 0, 40, 10, F, H},    // FemaleHusband
         {0, 0, 40, 10, M, W},    // MaleWife
         {0, 0, 40, 20, M, N},    // EduRange
         {0, 0, 40, 10, M, H},
         {0, 0, 40, 10, F, W}},
        {2, 1, 1, 1, 1, 5});

  for (size_t i = 0; i < fixtures.size(); ++i) {
    const SemanticReport rep = semantic_check(fixtures[i].table);
    const RuleExpect& w = fixtures[i].want;
    const long n = rep.n;
    auto match = [&](const std::string& id, long count) {
      const SemanticRule& r = rule_by_id(rep, id);
      return r.count == count && r.rate == static_cast<double>(count) / static_cast<double>(n);
    };
    const bool ok = rep.n == fixtures[i].table.rows() && match("NegCapital", w.neg) &&
                    match("HoursRange", w.hours) && match("FemaleHusband", w.fh) &&
                    match("MaleWife", w.mw) && match("EduRange", w.edu) &&
                    rep.any_count == w.any &&
                    rep.any_rate == static_cast<double>(w.any) / static_cast<double>(n);
    if (!ok) return {false, strf("fixture %zu: reported rates differ from hand counts", i + 1)};
  }

  const SemanticReport real_rep = semantic_check(env.census_train);
  const double neg = rule_by_id(real_rep, "NegCapital").rate;
  const double edu = rule_by_id(real_rep, "EduRange").rate;
  const bool clean_ok = neg == 0.0 && edu == 0.0;
  return {clean_ok, strf("10/10 fixtures match hand counts exactly; cleaned table NegCapital=%g "
                         "EduRange=%g (want 0)",
                         neg, edu)};
}

// --- criterion 4: analytic gradients vs finite differences -------------------

std::pair<bool, std::string> criterion4() {
  const auto t0 = Clock::now();
  const GradCheckResult g = cmd_gradcheck(2026, 256, 1.0);
  const double secs = seconds_since(t0);
  const bool pass = g.checked >= 200 && g.max_rel_error < 1e-3 && secs < 60.0;
  return {pass, strf("%d parameters checked (need >= 200), max relative error %.3g (tol 1e-3), "
                     "%.1fs (limit 60s)",
                     g.checked, g.max_rel_error, secs)};
}

// --- criterion 5: learning on the two-column toy set -------------------------

std::pair<bool, std::string> criterion5(const Env& env) {
  const auto t0 = Clock::now();
  const std::string csv = env.dir.file("toy_accept.csv");
  datagen::ToyOptions opts;
  opts.seed = 5;
  opts.rows = 500;
  datagen::write_toy_csv(csv, opts);
  const Table toy = load_table(csv, datagen::toy_schema());
  const CodecSpec codec = fit_codec(toy);
  const Layout layout = baseline_layout(codec);

  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e-3;
  cfg.seed = 2026;
  cfg.sample_every = 30;
  cfg.timesteps = 100;
  cfg.base_channels = 8;
  cfg.time_dim = 32;
  const TrainResult res = train(toy, layout, codec, cfg);
  if (res.diverged || res.log.size() != 30)
    return {false, strf("training did not complete 30 epochs (diverged=%d, epochs logged=%zu)",
                        res.diverged ? 1 : 0, res.log.size())};
  const double first = res.log.front().mean_loss;
  const double last = res.log.back().mean_loss;

  const std::vector<Grid> grids = sample(res.checkpoint, 1000, 2027);
  const Table synth = decode_grids(grids, layout, codec);
  const int lcol = toy.schema().column_index("label");
  const int bcode = vocab_index(toy.schema(), "label", "B");
  auto share_b = [&](const Table& t) {
    long c = 0;
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      if (t.code(r, lcol) == bcode) ++c;
    return static_cast<double>(c) / static_cast<double>(t.rows());
  };
  const double real_share = share_b(toy);
  const double synth_share = share_b(synth);
  const double diff = std::fabs(real_share - synth_share);
  const double secs = seconds_since(t0);

  const bool pass = last <= 0.5 * first && diff <= 0.10 && secs < 300.0;
  return {pass, strf("mean loss epoch1=%.4f epoch30=%.4f (need <= 0.5x); label-B share real=%.3f "
                     "synthetic=%.3f |Δ|=%.3f (tol 0.10); %.0fs (limit 300s)",
                     first, last, real_share, synth_share, diff, secs)};
}

// --- criterion 6: three-layout end-to-end run --------------------------------

struct RangeCheck {
  long n = 0;
  double lo = 1.0, hi = 0.0;
  bool ok = true;
  void add(double v) {
    ++n;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    if (!(v >= 0.0 && v <= 1.0)) ok = false;
  }
};

void collect_scores(const nlohmann::json& j, RangeCheck& rc) {
  const auto& f = j.at("fidelity");
  rc.add(f.at("overall").get<double>());
  rc.add(f.at("column_shapes_mean").get<double>());
  rc.add(f.at("pairwise_mean").get<double>());
  for (const auto& s : f.at("shapes")) rc.add(s.at("score").get<double>());
  for (const auto& p : f.at("pairs")) rc.add(p.at("score").get<double>());
  const auto& sem = j.at("semantic");
  rc.add(sem.at("any_rate").get<double>());
  for (const auto& r : sem.at("rules")) rc.add(r.at("rate").get<double>());
  const auto& ts = j.at("tstr");
  for (const char* key : {"accuracy", "precision_le50k", "recall_le50k", "f1_le50k",
                          "precision_gt50k", "recall_gt50k", "f1_gt50k"})
    rc.add(ts.at(key).get<double>());
  rc.add(j.at("disclosure").at("score").get<double>());
}

std::pair<bool, std::string> criterion6(const Env& env) {
  const auto t0 = Clock::now();
  const std::string train_csv = env.dir.file("census_small_train.csv");
  const std::string test_csv = env.dir.file("census_small_test.csv");
  const std::string plan_path = env.dir.file("manual_plan.json");
  datagen::CensusOptions train_opts;
  train_opts.seed = 31;
  train_opts.rows = 2000;
  datagen::write_census_csv(train_csv, train_opts);
  datagen::CensusOptions test_opts;
  test_opts.seed = 32;
  test_opts.rows = 1000;
  test_opts.test_split = true;
  datagen::write_census_csv(test_csv, test_opts);
  testutil::write_file(plan_path, datagen::census_manual_plan_json());

  struct LayoutRun {
    LayoutStrategy strategy;
    const char* name;
    bool clamp;
  };
  const std::vector<LayoutRun> runs = {{LayoutStrategy::Baseline, "baseline", false},
                                       {LayoutStrategy::Clustered, "clustered", true},
                                       {LayoutStrategy::Manual, "manual", true}};

  RangeCheck rc;
  std::vector<double> any_rates;
  for (const auto& run : runs) {
    RunConfig cfg;
    cfg.schema_path = env.census_schema_path;
    cfg.train_csv = train_csv;
    cfg.test_csv = test_csv;
    cfg.strategy = run.strategy;
    if (run.strategy == LayoutStrategy::Manual) cfg.plan_path = plan_path;
    cfg.train.epochs = 10;
    cfg.train.timesteps = 100;
    cfg.train.batch_size = 64;
    cfg.train.base_channels = 16;
    cfg.train.sample_count = 500;
    cfg.train.sample_every = 5;
    cfg.train.seed = 2026;
    cfg.seed = 2026;
    cfg.clamp_decode = run.clamp;
    cfg.out_dir = env.dir.file(strf("accept6_%s", run.name));
    const RunManifest manifest = cmd_pipeline(cfg);
    if (!manifest.error.empty())
      return {false, strf("%s run failed: %s", run.name, manifest.error.c_str())};
    const auto audit =
        nlohmann::json::parse(testutil::read_file(cfg.out_dir + "/audit.json"));
    collect_scores(audit, rc);
    any_rates.push_back(audit.at("semantic").at("any_rate").get<double>());
  }
  const double secs = seconds_since(t0);
  const bool order_ok = any_rates[0] >= any_rates[1] && any_rates[0] >= any_rates[2];
  const bool pass = rc.ok && order_ok && secs < 1800.0;
  return {pass,
          strf("3/3 layouts completed; %ld audit scores all in [0,1] (min %.4f, max %.4f); "
               "rule-violation rate baseline=%.3f >= clustered=%.3f, manual=%.3f; %.0fs "
               "(limit 1800s)",
               rc.n, rc.lo, rc.hi, any_rates[0], any_rates[1], any_rates[2], secs)};
}

// --- criterion 7: classifier utility sanity ----------------------------------

struct LogRegFeatures {
  Matrix x;            // n x d, intercept appended
  std::vector<int> y;  // 1 = ">50K"
};

LogRegFeatures logreg_features(const Table& t, const CodecSpec& codec) {
  const Matrix enc = encode_table(t, codec);
  const FeatureBlock& income = codec.block_for("income");
  const int d = codec.encoded_width - income.width + 1;
  LogRegFeatures out;
  out.x.resize(t.rows(), d);
  int col_out = 0;
  for (int c = 0; c < codec.encoded_width; ++c) {
    if (c >= income.offset && c < income.offset + income.width) continue;
    out.x.col(col_out++) = enc.col(c);
  }
  out.x.col(d - 1).setOnes();
  const int income_col = t.schema().column_index("income");
  const int gt50 = vocab_index(t.schema(), "income", ">50K");
  out.y.resize(static_cast<size_t>(t.rows()));
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    out.y[static_cast<size_t>(r)] = t.code(r, income_col) == gt50 ? 1 : 0;
  return out;
}

// Independent check: ridge-regularized logistic regression fitted by Newton's
// method (iteratively reweighted least squares) instead of gradient descent.
double irls_accuracy(const LogRegFeatures& train, const LogRegFeatures& test, double l2) {
  const Eigen::Index n = train.x.rows();
  const Eigen::Index d = train.x.cols();
  Vector w = Vector::Zero(d);
  Vector yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = train.y[static_cast<size_t>(i)];
  for (int iter = 0; iter < 25; ++iter) {
    const Vector z = train.x * w;
    const Vector p = 1.0 / (1.0 + (-z.array()).exp());
    Vector grad = train.x.transpose() * (p - yv) / static_cast<double>(n);
    Matrix h = train.x.transpose() *
               ((p.array() * (1.0 - p.array())).matrix().asDiagonal() * train.x) /
               static_cast<double>(n);
    for (Eigen::Index j = 0; j + 1 < d; ++j) {  // intercept stays unregularized
      grad[j] += l2 * w[j];
      h(j, j) += l2;
    }
    h.diagonal().array() += 1e-10;
    const Vector step = h.ldlt().solve(grad);
    w -= step;
    if (step.norm() < 1e-10) break;
  }
  long correct = 0;
  const Vector zt = test.x * w;
  for (Eigen::Index i = 0; i < zt.size(); ++i) {
    const int pred = zt[i] >= 0.0 ? 1 : 0;
    if (pred == test.y[static_cast<size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(zt.size());
}

std::pair<bool, std::string> criterion7(const Env& env) {
  const TSTRResult a = tstr(env.census_train, env.census_test, 2026);
  const TSTRResult b = tstr(env.census_train, env.census_test, 2026);
  const bool deterministic = a.tp == b.tp && a.tn == b.tn && a.fp == b.fp && a.fn == b.fn;

  const CodecSpec codec = fit_codec(env.census_test);
  const LogRegFeatures ftrain = logreg_features(env.census_train, codec);
  const LogRegFeatures ftest = logreg_features(env.census_test, codec);
  const double oracle_acc = irls_accuracy(ftrain, ftest, 1e-4);

  const bool pass = a.accuracy >= 0.80 && oracle_acc >= 0.80 &&
                    std::fabs(a.accuracy - oracle_acc) <= 0.05 && deterministic;
  return {pass, strf("train-on-real accuracy %.4f (need >= 0.80), Newton-solver reference %.4f "
                     "(|Δ|=%.4f, tol 0.05); repeated run confusion matrix identical: %s",
                     a.accuracy, oracle_acc, std::fabs(a.accuracy - oracle_acc),
                     deterministic ? "yes" : "no")};
}

// --- criterion 8: byte-identical pipeline reruns ------------------------------

int run_shell(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  if (WIFEXITED(rc)) return WEXITSTATUS(rc);
  return -2;
}

std::pair<bool, std::string> criterion8(const Env& env) {
  const std::string schema_path = env.dir.file("toy_schema.json");
  const std::string csv = env.dir.file("toy_repro.csv");
  testutil::write_file(schema_path, datagen::toy_schema_config());
  datagen::ToyOptions opts;
  opts.seed = 13;
  opts.rows = 200;
  datagen::write_toy_csv(csv, opts);

  auto pipeline_cmd = [&](const std::string& out_dir, const std::string& log) {
    return std::string(TABDIFF_BIN) + " pipeline --schema " + schema_path + " --train-csv " +
           csv + " --layout baseline --epochs 3 --timesteps 50 --rows 100 --batch-size 32" +
           " --base-channels 8 --time-dim 16 --seed 77 --out " + out_dir + " > " + log +
           " 2>&1";
  };
  const std::string run_a = env.dir.file("accept8_a");
  const std::string run_b = env.dir.file("accept8_b");
  const int rc_a = run_shell(pipeline_cmd(run_a, env.dir.file("accept8_a.log")));
  const int rc_b = run_shell(pipeline_cmd(run_b, env.dir.file("accept8_b.log")));
  if (rc_a != 0 || rc_b != 0)
    return {false, strf("pipeline runs exited %d and %d (want 0)", rc_a, rc_b)};

  std::vector<std::string> same, differ;
  for (const char* name : {"synthetic.csv", "checkpoint.bin", "audit.json", "audit.md"}) {
    const std::string a = testutil::read_file(run_a + "/" + name);
    const std::string b = testutil::read_file(run_b + "/" + name);
    (!a.empty() && a == b ? same : differ).push_back(name);
  }
  if (!differ.empty()) {
    std::string names;
    for (const auto& n : differ) names += (names.empty() ? "" : ", ") + n;
    return {false, "artifacts differ between identical runs: " + names};
  }
  return {true, strf("%zu artifacts byte-identical across two identically-seeded runs "
                     "(synthetic.csv, checkpoint.bin, audit.json, audit.md)",
                     same.size())};
}

// --- criterion 9: structural shares of the cleaned table ----------------------

std::pair<bool, std::string> criterion9(const Env& env) {
  const StructuralReport rep = structural_report(env.census_train, env.census_train);
  auto real_pct = [&](const std::string& feature) {
    for (const auto& row : rep.rows)
      if (row.feature == feature) return row.real_pct;
    throw DataError("structural feature missing: " + feature);
  };
  const double gt50 = real_pct(">50K income");
  const double married = real_pct("Married-civ-spouse");
  const double husband = real_pct("Husband");
  const bool pass = std::fabs(gt50 - 23.6) <= 0.5 && std::fabs(married - 44.8) <= 0.5 &&
                    std::fabs(husband - 40.0) <= 0.5;
  return {pass, strf(">50K=%.2f%% (target 23.6±0.5), Married-civ-spouse=%.2f%% (target "
                     "44.8±0.5), Husband=%.2f%% (target 40.0±0.5); %ld raw rows, %ld dropped "
                     "by cleaning",
                     gt50, married, husband, env.train_load.raw_rows,
                     env.train_load.dropped_rows)};
}

}  // namespace

int main() {
  std::printf("acceptance battery: 9 criteria\n");
  std::fflush(stdout);
  std::optional<Env> env;
  try {
    env.emplace();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fatal: could not prepare shared data: %s\n", e.what());
    return 1;
  }

  run_criterion(1, "codec roundtrip", [&] { return criterion1(*env); });
  run_criterion(2, "fidelity identity and score oracles", [&] { return criterion2(*env); });
  run_criterion(3, "rule checker oracle equivalence", [&] { return criterion3(*env); });
  run_criterion(4, "gradient check", [] { return criterion4(); });
  run_criterion(5, "toy-data learning", [&] { return criterion5(*env); });
  run_criterion(6, "three-layout end-to-end run", [&] { return criterion6(*env); });
  run_criterion(7, "classifier utility sanity", [&] { return criterion7(*env); });
  run_criterion(8, "pipeline determinism", [&] { return criterion8(*env); });
  run_criterion(9, "structural ground truth", [&] { return criterion9(*env); });

  std::printf("%d/9 criteria passed\n", 9 - g_failures);
  return g_failures;
}
