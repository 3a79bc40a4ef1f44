#pragma once

#include "tabdiff/codec.hpp"
#include "tabdiff/common.hpp"
#include "tabdiff/schema.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tabdiff {

// --- statistical fidelity ---------------------------------------------------

struct ShapeScore {
  std::string column;
  std::string method;  // "ks_complement" | "tv_complement"
  double score = 0.0;
};

struct PairScore {
  std::string col_a, col_b;
  std::string method;  // "correlation_similarity" | "contingency_similarity"
  double score = 0.0;
};

struct FidelityScores {
  std::vector<ShapeScore> shapes;
  std::vector<PairScore> pairs;
  double column_shapes_mean = 0.0;
  double pairwise_mean = 0.0;
  double overall = 0.0;  // mean of the two property means
  std::vector<std::string> warnings;
};

// Numeric: 1 - two-sample Kolmogorov-Smirnov statistic. Categorical: 1 -
// total-variation distance between category frequency vectors.
double column_shape_score(const Table& real, const Table& synth, int col);

// Numeric-numeric: 1 - |r_real - r_synth| / 2 (Pearson). Pairs involving a
// categorical column: 1 - TV distance between normalized contingency tables,
// numeric partners discretized into deciles of the real column. Returns
// nullopt (with a warning) when a numeric-numeric pair has a zero-variance
// side.
std::optional<PairScore> pairwise_correlation_score(const Table& real, const Table& synth,
                                                    int col_a, int col_b,
                                                    std::vector<std::string>* warnings = nullptr);

FidelityScores fidelity(const Table& real, const Table& synth);

// --- semantic consistency ---------------------------------------------------

struct SemanticBounds {
  double hours_min = 1.0, hours_max = 99.0;
  double edu_min = 1.0, edu_max = 16.0;
};

struct SemanticRule {
  std::string id;
  long count = 0;
  double rate = 0.0;
  std::vector<long> rows;  // flagged row indices
};

struct SemanticReport {
  long n = 0;
  std::vector<SemanticRule> rules;  // NegCapital, HoursRange, FemaleHusband, MaleWife, EduRange
  long any_count = 0;               // rows violating at least one rule
  double any_rate = 0.0;
};

// Census-style row logic: negative capital fields, hours outside a realistic
// range, sex/relationship contradictions, education-num outside [1, 16].
// Throws DataError when a required column is absent.
SemanticReport semantic_check(const Table& table, const SemanticBounds& bounds = {});

// --- downstream utility (train on synthetic, test on real) ------------------

struct TSTRResult {
  double accuracy = 0.0;
  // class "<=50K"
  double precision_le = 0.0, recall_le = 0.0, f1_le = 0.0;
  // class ">50K"
  double precision_gt = 0.0, recall_gt = 0.0, f1_gt = 0.0;
  long tp = 0, tn = 0, fp = 0, fn = 0;  // ">50K" is the positive class
  bool degenerate = false;              // single-class training data
  long train_rows = 0, test_rows = 0;
  uint64_t seed = 0;
};

// Logistic regression on the encoded features minus the income block,
// full-batch gradient descent with a fixed iteration budget. When `codec` is
// null it is fitted on `real_test` so degenerate synthetic columns cannot
// poison the scaling.
TSTRResult tstr(const Table& synth_train, const Table& real_test, uint64_t seed,
                const CodecSpec* codec = nullptr);

// --- disclosure -------------------------------------------------------------

struct DisclosureReport {
  double min_dcr = 0.0;
  double median_dcr = 0.0;
  double median_real_loo = 0.0;  // real-to-real leave-one-out NN distance
  double score = 0.0;            // median_dcr / median_real_loo, clipped to [0, 1]
  std::string definition;
  long n_synth = 0, n_real = 0;
};

// Distance-to-closest-record in the encoded [0,1] feature space.
DisclosureReport disclosure(const Table& real, const Table& synth,
                            const CodecSpec* codec = nullptr);

// --- structural / diversity features ----------------------------------------

struct StructuralReport {
  struct Row {
    std::string feature;
    double real_pct = 0.0;
    double synth_pct = 0.0;
  };
  std::vector<Row> rows;
};

// Income >50K share, married-civ-spouse %, Husband %, Bachelors-or-higher %
// (education-num >= 13), White %, foreign-born % for both tables.
StructuralReport structural_report(const Table& real, const Table& synth);

// --- combined report ----------------------------------------------------------

struct AuditOptions {
  bool run_fidelity = true;
  bool run_semantic = true;
  bool run_tstr = true;
  bool run_disclosure = true;
  bool run_structural = true;
  uint64_t seed = 0;
  SemanticBounds bounds;
  std::string layout_name;  // echoed into the report
  long raw_rows = -1;       // pre-cleaning row count, when known
  long dropped_rows = -1;   // rows removed by the missing-value policy
};

struct AuditReport {
  std::string layout_name;
  long real_rows = 0, synth_rows = 0;
  long raw_rows = -1, dropped_rows = -1;
  std::optional<FidelityScores> fidelity;
  std::optional<SemanticReport> semantic;
  std::optional<TSTRResult> tstr;
  std::optional<DisclosureReport> disclosure;
  std::optional<StructuralReport> structural;
  std::vector<std::string> notes;

  std::string to_json() const;
  std::string to_markdown() const;
};

// Runs every enabled section; sections whose required columns are missing are
// skipped with a note instead of failing, so the battery also runs on non-
// census schemas.
AuditReport run_audit(const Table& real_train, const Table& real_test, const Table& synth,
                      const AuditOptions& opts, const CodecSpec* codec = nullptr);

}  // namespace tabdiff
