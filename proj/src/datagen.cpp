#include "tabdiff/datagen.hpp"

#include "tabdiff/layout.hpp"
#include "tabdiff/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <vector>

namespace tabdiff::datagen {

namespace {

// --- vocabularies (UCI Adult data dictionary) -------------------------------

const std::vector<std::string> kWorkclass = {
    "Private",   "Self-emp-not-inc", "Self-emp-inc", "Federal-gov",
    "Local-gov", "State-gov",        "Without-pay",  "Never-worked"};

const std::vector<std::string> kEducation = {
    "Preschool", "1st-4th",      "5th-6th",   "7th-8th",   "9th",       "10th",
    "11th",      "12th",         "HS-grad",   "Some-college", "Assoc-voc",
    "Assoc-acdm", "Bachelors",   "Masters",   "Prof-school", "Doctorate"};

const std::vector<std::string> kMarital = {
    "Married-civ-spouse",    "Divorced",  "Never-married", "Separated",
    "Widowed",               "Married-spouse-absent",      "Married-AF-spouse"};

const std::vector<std::string> kOccupation = {
    "Tech-support",     "Craft-repair",      "Other-service",  "Sales",
    "Exec-managerial",  "Prof-specialty",    "Handlers-cleaners",
    "Machine-op-inspct", "Adm-clerical",     "Farming-fishing",
    "Transport-moving", "Priv-house-serv",   "Protective-serv", "Armed-Forces"};

const std::vector<std::string> kRelationship = {
    "Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried"};

const std::vector<std::string> kRace = {
    "White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"};

const std::vector<std::string> kSex = {"Female", "Male"};

const std::vector<std::string> kCountry = {
    "United-States", "Cambodia",  "England", "Puerto-Rico", "Canada",  "Germany",
    "Outlying-US(Guam-USVI-etc)", "India",   "Japan",       "Greece",  "South",
    "China",         "Cuba",      "Iran",    "Honduras",    "Philippines",
    "Italy",         "Poland",    "Jamaica", "Vietnam",     "Mexico",  "Portugal",
    "Ireland",       "France",    "Dominican-Republic",     "Laos",    "Ecuador",
    "Taiwan",        "Haiti",     "Columbia", "Hungary",    "Guatemala",
    "Nicaragua",     "Scotland",  "Thailand", "Yugoslavia", "El-Salvador",
    "Trinadad&Tobago", "Peru",    "Hong",    "Holand-Netherlands"};

const std::vector<std::string> kIncome = {"<=50K", ">50K"};

// education -> education-num in the published data dictionary (1..16)
int education_num(int edu_code) { return edu_code + 1; }  // kEducation is in num order

// --- weighted sampling --------------------------------------------------------

struct Discrete {
  std::vector<double> cumulative;
  explicit Discrete(const std::vector<double>& weights) {
    cumulative.resize(weights.size());
    double run = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      run += weights[i];
      cumulative[i] = run;
    }
  }
  int operator()(double u) const {  // u in [0, 1)
    const double x = u * cumulative.back();
    return static_cast<int>(
        std::upper_bound(cumulative.begin(), cumulative.end(), x) - cumulative.begin());
  }
};

// Marginals shaped to the published summaries of the real table (not fitted
// data; see README for the stand-in rationale).
const Discrete kEducationDist{{
    0.0016, 0.0052, 0.0102, 0.0198, 0.0158, 0.0287, 0.0361, 0.0133,  // Preschool..12th
    0.330, 0.2295, 0.0424, 0.0328,                                   // HS-grad..Assoc-acdm
    0.150, 0.048, 0.016, 0.012                                       // Bachelors..Doctorate
}};
const Discrete kWorkclassDist{{0.697, 0.079, 0.034, 0.029, 0.064, 0.040, 0.0004, 0.0002}};
const Discrete kOccupationDist{{0.030, 0.133, 0.107, 0.118, 0.132, 0.134, 0.045, 0.065, 0.122,
                                0.032, 0.052, 0.005, 0.021, 0.0003}};
const Discrete kRaceDist{{0.855, 0.031, 0.010, 0.008, 0.096}};
const Discrete kCountryDist{{10.2,   0.008, 0.04,  0.05,  0.055, 0.06,  0.006, 0.045, 0.025,
                             0.013,  0.035, 0.035, 0.04,  0.02,  0.006, 0.09,  0.03,  0.025,
                             0.035,  0.03,  0.29,  0.015, 0.01,  0.013, 0.03,  0.008, 0.012,
                             0.02,   0.02,  0.025, 0.006, 0.025, 0.015, 0.005, 0.008, 0.007,
                             0.045,  0.008, 0.015, 0.01,  0.002}};
// unmarried-only marital detail: Divorced, Never-married, Separated, Widowed,
// Married-spouse-absent, Married-AF-spouse
const Discrete kUnmarriedMaritalDist{{0.246, 0.594, 0.057, 0.055, 0.023, 0.0013}};
const int kUnmarriedMaritalCodes[] = {1, 2, 3, 4, 5, 6};  // into kMarital
// unmarried relationship: Own-child, Not-in-family, Other-relative, Unmarried
const Discrete kUnmarriedRelDist{{0.281, 0.462, 0.054, 0.192}};
const int kUnmarriedRelCodes[] = {1, 3, 4, 5};  // into kRelationship

double occupation_bonus(int code) {
  static const double bonus[] = {0.4,  0.0, -1.0, 0.25, 0.9,  0.8, -0.7,
                                 -0.3, -0.2, -0.5, 0.0, -1.5, 0.3, 0.0};
  return bonus[code];
}

long clamp_round(double v, long lo, long hi) {
  return std::clamp(std::llround(v), static_cast<long long>(lo), static_cast<long long>(hi));
}

// --- row model -----------------------------------------------------------------

struct RawRow {
  bool miss_work = false;     // hides workclass and occupation
  bool miss_country = false;
  double u_married = 0, u_husband = 0, u_sex = 0, u_marital = 0, u_rel = 0;
  double z_age = 0, z_hours = 0, z_fnlwgt = 0, eps = 0;
  int edu = 0, workclass = 0, occupation = 0, race = 0, country = 0;
  long capital_gain = 0, capital_loss = 0;
  // resolved fields
  bool married = false, husband = false, male = false, gt50 = false;
  int marital = 0, relationship = 0;
  long age = 0, hours = 0, fnlwgt = 0;
  double score = 0;
};

RawRow draw_row(uint64_t seed, uint64_t split, long index) {
  CounterRng rng(seed, {CounterRng::label("census"), split, static_cast<uint64_t>(index)});
  RawRow r;
  r.miss_work = rng.uniform() < 0.057;
  r.miss_country = rng.uniform() < 0.0179;
  r.u_married = rng.uniform();
  r.u_husband = rng.uniform();
  r.u_sex = rng.uniform();
  r.u_marital = rng.uniform();
  r.u_rel = rng.uniform();
  r.z_age = rng.normal();
  r.z_hours = rng.normal();
  r.edu = kEducationDist(rng.uniform());
  r.workclass = kWorkclassDist(rng.uniform());
  r.occupation = kOccupationDist(rng.uniform());
  r.race = kRaceDist(rng.uniform());
  r.country = kCountryDist(rng.uniform());
  r.z_fnlwgt = rng.normal();
  const double u_gain_zero = rng.uniform();
  const double u_gain_spike = rng.uniform();
  const double z_gain = rng.normal();
  const double u_loss_zero = rng.uniform();
  const double z_loss = rng.normal();
  r.eps = rng.normal();

  if (u_gain_zero >= 0.917)
    r.capital_gain = u_gain_spike < 0.0225 ? 99999 : clamp_round(std::exp(8.7 + z_gain), 114, 41310);
  if (u_loss_zero >= 0.953) r.capital_loss = clamp_round(1870.0 + 350.0 * z_loss, 155, 4356);
  r.fnlwgt = clamp_round(std::exp(12.0 + 0.48 * r.z_fnlwgt), 12285, 1484705);
  return r;
}

void resolve_row(RawRow& r) {
  // married/husband may already be pinned by quota; otherwise fall back to
  // the row's own uniforms (used for rows the cleaner will drop).
  if (r.married) {
    r.marital = 0;  // Married-civ-spouse
    if (r.husband) {
      r.male = true;
      r.relationship = 2;  // Husband
    } else {
      r.male = false;
      r.relationship = 0;  // Wife
    }
  } else {
    r.husband = false;
    r.male = r.u_sex >= 0.513;
    r.marital = kUnmarriedMaritalCodes[kUnmarriedMaritalDist(r.u_marital)];
    r.relationship = kUnmarriedRelCodes[kUnmarriedRelDist(r.u_rel)];
  }
  r.age = r.married ? clamp_round(44.0 + 12.0 * r.z_age, 17, 90)
                    : clamp_round(33.0 + 13.0 * r.z_age, 17, 90);
  r.hours = r.married ? clamp_round(42.0 + 10.0 * r.z_hours, 1, 99)
                      : clamp_round(38.0 + 13.0 * r.z_hours, 1, 99);
  r.score = 2.4 * (r.married ? 1.0 : 0.0) + 0.33 * (education_num(r.edu) - 9) +
            0.045 * (std::min<long>(r.age, 65) - 38) + 0.013 * (r.hours - 40) +
            1.5 * (r.capital_gain > 0 ? 1.0 : 0.0) + 0.8 * (r.capital_loss > 0 ? 1.0 : 0.0) +
            0.25 * (r.male ? 1.0 : 0.0) + (r.miss_work ? 0.0 : occupation_bonus(r.occupation)) +
            1.1 * r.eps;
}

}  // namespace

// --- public API ------------------------------------------------------------------

Schema census_schema() { return parse_schema(census_schema_config()); }

std::string census_schema_config() {
  auto vocab = [](const std::vector<std::string>& v) {
    std::string out = "[";
    for (size_t i = 0; i < v.size(); ++i) {
      out += "\"" + v[i] + "\"";
      if (i + 1 < v.size()) out += ", ";
    }
    return out + "]";
  };
  std::string s = "{\n  \"columns\": [\n";
  s += "    {\"name\": \"age\", \"kind\": \"numeric\", \"integer\": true, \"range\": [17, 90]},\n";
  s += "    {\"name\": \"workclass\", \"kind\": \"categorical\", \"vocabulary\": " + vocab(kWorkclass) + "},\n";
  s += "    {\"name\": \"fnlwgt\", \"kind\": \"numeric\", \"integer\": true, \"range\": [10000, 1500000]},\n";
  s += "    {\"name\": \"education\", \"kind\": \"categorical\", \"vocabulary\": " + vocab(kEducation) + "},\n";
  s += "    {\"name\": \"education-num\", \"kind\": \"numeric\", \"integer\": true, \"range\": [1, 16]},\n";
  s += "    {\"name\": \"marital-status\", \"kind\": \"categorical\", \"vocabulary\": " + vocab(kMarital) + "},\n";
  s += "    {\"name\": \"occupation\", \"kind\": \"categorical\", \"vocabulary\": " + vocab(kOccupation) + "},\n";
  s += "    {\"name\": \"relationship\", \"kind\": \"categorical\", \"vocabulary\": " + vocab(kRelationship) + "},\n";
  s += "    {\"name\": \"race\", \"kind\": \"categorical\", \"vocabulary\": " + vocab(kRace) + "},\n";
  s += "    {\"name\": \"sex\", \"kind\": \"categorical\", \"vocabulary\": " + vocab(kSex) + "},\n";
  s += "    {\"name\": \"capital-gain\", \"kind\": \"numeric\", \"integer\": true, \"range\": [0, 99999]},\n";
  s += "    {\"name\": \"capital-loss\", \"kind\": \"numeric\", \"integer\": true, \"range\": [0, 4356]},\n";
  s += "    {\"name\": \"hours-per-week\", \"kind\": \"numeric\", \"integer\": true, \"range\": [1, 99]},\n";
  s += "    {\"name\": \"native-country\", \"kind\": \"categorical\", \"vocabulary\": " + vocab(kCountry) + "},\n";
  s += "    {\"name\": \"income\", \"kind\": \"categorical\", \"vocabulary\": " + vocab(kIncome) + "}\n";
  s += "  ]\n}\n";
  return s;
}

CensusStats write_census_csv(const std::string& path, const CensusOptions& opts) {
  if (opts.rows <= 0) throw UsageError("census generator needs a positive row count");
  if (opts.husband_share > opts.married_share)
    throw UsageError("husband share cannot exceed married share");
  const uint64_t split = opts.test_split ? 1 : 0;

  std::vector<RawRow> rows(static_cast<size_t>(opts.rows));
  std::vector<long> clean;
  clean.reserve(rows.size());
  for (long i = 0; i < opts.rows; ++i) {
    rows[static_cast<size_t>(i)] = draw_row(opts.seed, split, i);
    if (!rows[static_cast<size_t>(i)].miss_work && !rows[static_cast<size_t>(i)].miss_country)
      clean.push_back(i);
  }

  // Quota-pin married and husband on the clean subset: a seeded shuffle makes
  // the first k entries a uniform random subset.
  const long n_clean = static_cast<long>(clean.size());
  const long k_married = std::lround(opts.married_share * static_cast<double>(n_clean));
  const long k_husband = std::lround(opts.husband_share * static_cast<double>(n_clean));
  {
    std::vector<long> order = clean;
    CounterRng qrng(opts.seed, {CounterRng::label("census-quota"), split});
    qrng.shuffle(order);
    for (long i = 0; i < k_married; ++i) {
      rows[static_cast<size_t>(order[static_cast<size_t>(i)])].married = true;
      if (i < k_husband) rows[static_cast<size_t>(order[static_cast<size_t>(i)])].husband = true;
    }
  }
  for (long i = 0; i < opts.rows; ++i) {
    RawRow& r = rows[static_cast<size_t>(i)];
    if (r.miss_work || r.miss_country) {
      r.married = r.u_married < opts.married_share;
      r.husband = r.married && r.u_husband < opts.husband_share / opts.married_share;
    }
    resolve_row(r);
  }

  // Quota-pin income on the clean subset by taking the top-scoring rows.
  const long k_gt50 = std::lround(opts.gt50_share * static_cast<double>(n_clean));
  {
    std::vector<long> by_score = clean;
    std::sort(by_score.begin(), by_score.end(), [&](long a, long b) {
      const double sa = rows[static_cast<size_t>(a)].score, sb = rows[static_cast<size_t>(b)].score;
      return sa != sb ? sa > sb : a < b;
    });
    for (long i = 0; i < k_gt50; ++i) rows[static_cast<size_t>(by_score[static_cast<size_t>(i)])].gt50 = true;
    const double threshold =
        k_gt50 > 0 ? rows[static_cast<size_t>(by_score[static_cast<size_t>(k_gt50 - 1)])].score
                   : std::numeric_limits<double>::infinity();
    for (long i = 0; i < opts.rows; ++i) {
      RawRow& r = rows[static_cast<size_t>(i)];
      if (r.miss_work || r.miss_country) r.gt50 = r.score > threshold;
    }
  }

  std::ofstream out(path);
  if (!out) throw DataError("cannot open output CSV: " + path);
  out << "age,workclass,fnlwgt,education,education-num,marital-status,occupation,relationship,"
         "race,sex,capital-gain,capital-loss,hours-per-week,native-country,income\n";
  CensusStats stats;
  stats.rows = opts.rows;
  stats.clean_rows = n_clean;
  for (long i = 0; i < opts.rows; ++i) {
    const RawRow& r = rows[static_cast<size_t>(i)];
    out << r.age << ',' << (r.miss_work ? "?" : kWorkclass[static_cast<size_t>(r.workclass)])
        << ',' << r.fnlwgt << ',' << kEducation[static_cast<size_t>(r.edu)] << ','
        << education_num(r.edu) << ',' << kMarital[static_cast<size_t>(r.marital)] << ','
        << (r.miss_work ? "?" : kOccupation[static_cast<size_t>(r.occupation)]) << ','
        << kRelationship[static_cast<size_t>(r.relationship)] << ','
        << kRace[static_cast<size_t>(r.race)] << ',' << (r.male ? "Male" : "Female") << ','
        << r.capital_gain << ',' << r.capital_loss << ',' << r.hours << ','
        << (r.miss_country ? "?" : kCountry[static_cast<size_t>(r.country)]) << ','
        << (r.gt50 ? ">50K" : "<=50K") << (opts.test_split ? ".\n" : "\n");
    if (!r.miss_work && !r.miss_country) {
      stats.gt50 += r.gt50;
      stats.married += r.married;
      stats.husband += r.husband;
    }
  }
  if (!out) throw DataError("write failed: " + path);
  return stats;
}

std::string census_manual_plan_json() {
  PlacementPlan plan;
  // Group order and member order are chosen so the snake traversal lands the
  // canonical pairings next to each other: sex's block ends where
  // relationship's begins, and education-num's ends where occupation's begins.
  plan.groups = {
      {"demographics", {"age", "race", "sex"}},
      {"household", {"relationship", "marital-status"}},
      {"education", {"education", "education-num"}},
      {"work", {"occupation", "workclass", "hours-per-week"}},
      {"capital", {"capital-gain", "capital-loss", "income"}},
      {"residual", {"fnlwgt", "native-country"}},
  };
  return plan.to_json_text();
}

Schema toy_schema() { return parse_schema(toy_schema_config()); }

std::string toy_schema_config() {
  return R"({
  "columns": [
    {"name": "x", "kind": "numeric"},
    {"name": "label", "kind": "categorical", "vocabulary": ["A", "B"]}
  ]
}
)";
}

void write_toy_csv(const std::string& path, const ToyOptions& opts) {
  if (opts.rows <= 0) throw UsageError("toy generator needs a positive row count");
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output CSV: " + path);
  out << "x,label\n";
  const uint64_t split = opts.test_split ? 1 : 0;
  char buf[64];
  for (long i = 0; i < opts.rows; ++i) {
    CounterRng rng(opts.seed, {CounterRng::label("toy"), split, static_cast<uint64_t>(i)});
    const bool high = rng.uniform() < 0.5;
    const double x = (high ? 2.0 : -2.0) + 0.5 * rng.normal();
    const bool b = rng.uniform() < (x > 0.0 ? 0.9 : 0.1);
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    out << buf << ',' << (b ? 'B' : 'A') << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace tabdiff::datagen
