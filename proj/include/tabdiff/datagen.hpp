#pragma once

#include "tabdiff/schema.hpp"

#include <cstdint>
#include <string>

namespace tabdiff::datagen {

// Deterministic census-style stand-in for the UCI Adult table: same 15
// columns, vocabularies, missing-value sentinel and test-label quirk, with
// three headline shares pinned exactly on the cleaned subset so structural
// audits have fixed targets. Everything is keyed off the seed; no ambient
// entropy.
struct CensusOptions {
  uint64_t seed = 7;
  long rows = 32561;       // UCI train-split size; test split is 16281
  bool test_split = false; // income labels get a trailing '.', fresh substream
  double gt50_share = 0.236;
  double married_share = 0.448;  // Married-civ-spouse
  double husband_share = 0.400;  // relationship == Husband
};

struct CensusStats {
  long rows = 0;
  long clean_rows = 0;  // rows with no '?' cell
  // counts within the clean subset
  long gt50 = 0;
  long married = 0;
  long husband = 0;
};

Schema census_schema();
std::string census_schema_config();  // JSON schema config text
CensusStats write_census_csv(const std::string& path, const CensusOptions& opts);

// Curated manual placement plan for the census schema (semantically related
// columns grouped so they share grid neighborhoods).
std::string census_manual_plan_json();

// Tiny two-column dataset (bimodal numeric + correlated binary label) for
// fast end-to-end runs.
struct ToyOptions {
  uint64_t seed = 11;
  long rows = 500;
  bool test_split = false;
};

Schema toy_schema();
std::string toy_schema_config();
void write_toy_csv(const std::string& path, const ToyOptions& opts);

}  // namespace tabdiff::datagen
