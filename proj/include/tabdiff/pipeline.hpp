#pragma once

#include "tabdiff/audit.hpp"
#include "tabdiff/diffusion.hpp"
#include "tabdiff/layout.hpp"
#include "tabdiff/schema.hpp"

#include <string>
#include <vector>

namespace tabdiff {

// One end-to-end run: ingest -> codec -> layout -> train -> sample -> decode
// -> audit, everything persisted under one output directory.
struct RunConfig {
  std::string schema_path;
  std::string train_csv;
  std::string test_csv;  // optional; without it the TSTR section is skipped
  LayoutStrategy strategy = LayoutStrategy::Baseline;
  std::string plan_path;  // required when strategy == Manual
  TrainConfig train;
  AuditOptions audit;  // section toggles; seed/layout/row counts filled in
  std::string out_dir;
  uint64_t seed = 0;
  bool clamp_decode = true;  // false: raw sampler output, unclamped decode
  bool header = true;        // input CSVs carry a header row
  bool force = false;        // overwrite existing artifacts

  void validate() const;
  std::string echo_json() const;
};

struct StageTime {
  std::string stage;
  double seconds = 0.0;
};

struct InputHash {
  std::string role;  // "schema", "train_csv", ...
  std::string path;
  std::string fnv1a64;  // hex
};

struct RunManifest {
  std::string tool_version;
  std::string config_echo;  // JSON text
  std::vector<InputHash> inputs;
  std::vector<StageTime> stages;
  std::vector<std::string> artifacts;  // file names relative to out_dir
  std::string error;  // "stage: message" when a stage aborted; empty on success

  std::string to_json() const;
};

// Builds the layout for a strategy; `plan_json` is only read for Manual.
Layout make_layout(LayoutStrategy strategy, const Table& train, const CodecSpec& codec,
                   const std::string& plan_json);

// Runs the full pipeline. Artifacts: layout.txt, checkpoint.bin,
// loss_log.csv, synthetic.csv, audit.json, audit.md, plus manifest.json
// listing them. On a stage failure the manifest (with the stage name) is
// still written before the exception propagates.
RunManifest cmd_pipeline(const RunConfig& cfg);

// Standalone audit of an existing synthetic CSV against the real train/test
// files; the synthetic file is read under the real table's fitted
// vocabularies so category codes line up.
AuditReport cmd_audit(const std::string& schema_path, const std::string& train_csv,
                      const std::string& test_csv, const std::string& synth_csv,
                      const AuditOptions& opts, bool header = true);

// Gradient check on a small randomized net and seeded batch; returns the
// result for the caller to threshold. `fault_scale` forwards to the
// fault-injection hook in grad_check.
GradCheckResult cmd_gradcheck(uint64_t seed, int count = 256, double fault_scale = 1.0);

}  // namespace tabdiff
