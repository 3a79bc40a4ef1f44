#include "tabdiff/pipeline.hpp"

#include "tabdiff/checkpoint.hpp"
#include "tabdiff/hash.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tabdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

// Freeze a fitted schema so a second file must use exactly the same
// categories (and therefore the same codes).
Schema frozen_schema(const Schema& schema) {
  Schema out = schema;
  for (auto& col : out.columns)
    if (col.kind == ColumnKind::Categorical) col.vocabulary_declared = true;
  return out;
}

class StageClock {
 public:
  explicit StageClock(RunManifest& manifest) : manifest_(manifest) {}

  template <class Fn>
  auto run(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        record(stage, start);
      } else {
        auto out = fn();
        record(stage, start);
        return out;
      }
    } catch (const std::exception& e) {
      record(stage, start);
      manifest_.error = stage + ": " + e.what();
      throw;
    }
  }

 private:
  void record(const std::string& stage, std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    manifest_.stages.push_back({stage, dt.count()});
  }

  RunManifest& manifest_;
};

}  // namespace

void RunConfig::validate() const {
  if (schema_path.empty()) throw UsageError("a schema path is required");
  if (train_csv.empty()) throw UsageError("a training CSV is required");
  if (out_dir.empty()) throw UsageError("an output directory is required");
  if (strategy == LayoutStrategy::Manual && plan_path.empty())
    throw UsageError("the manual strategy requires a placement plan (--plan)");
  train.validate();
}

std::string RunConfig::echo_json() const {
  json j;
  j["schema"] = schema_path;
  j["train_csv"] = train_csv;
  j["test_csv"] = test_csv;
  j["strategy"] = to_string(strategy);
  j["plan"] = plan_path;
  j["seed"] = seed;
  j["clamp_decode"] = clamp_decode;
  j["header"] = header;
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"weight_decay", train.weight_decay},
                {"timesteps", train.timesteps},
                {"sample_count", train.sample_count},
                {"sample_every", train.sample_every},
                {"base_channels", train.base_channels},
                {"time_dim", train.time_dim}};
  return j.dump();
}

std::string RunManifest::to_json() const {
  json j;
  j["tool"] = "tabdiff";
  j["version"] = tool_version;
  j["config"] = config_echo.empty() ? json::object() : json::parse(config_echo);
  json in = json::array();
  for (const auto& h : inputs)
    in.push_back({{"role", h.role}, {"path", h.path}, {"fnv1a64", h.fnv1a64}});
  j["inputs"] = std::move(in);
  json st = json::array();
  for (const auto& s : stages) st.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
  j["stages"] = std::move(st);
  j["artifacts"] = artifacts;
  j["error"] = error;
  return j.dump(2) + "\n";
}

Layout make_layout(LayoutStrategy strategy, const Table& train, const CodecSpec& codec,
                   const std::string& plan_json) {
  switch (strategy) {
    case LayoutStrategy::Baseline:
      return baseline_layout(codec);
    case LayoutStrategy::Clustered: {
      const Matrix assoc = association(train);
      return clustered_layout(codec, assoc);
    }
    case LayoutStrategy::Manual: {
      const PlacementPlan plan = PlacementPlan::from_json_text(plan_json);
      return manual_layout(codec, plan);
    }
  }
  throw UsageError("unknown layout strategy");
}

RunManifest cmd_pipeline(const RunConfig& cfg) {
  cfg.validate();

  RunManifest manifest;
  manifest.tool_version = kVersion;
  manifest.config_echo = cfg.echo_json();

  fs::create_directories(cfg.out_dir);
  const auto path_of = [&](const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
  };
  const std::vector<std::string> targets = {"layout.txt", "checkpoint.bin", "loss_log.csv",
                                            "synthetic.csv", "audit.json", "audit.md",
                                            "manifest.json"};
  if (!cfg.force)
    for (const auto& name : targets)
      if (fs::exists(path_of(name)))
        throw UsageError("refusing to overwrite " + path_of(name) + " (use --force)");

  manifest.inputs.push_back({"schema", cfg.schema_path, hex64(hash_file(cfg.schema_path))});
  manifest.inputs.push_back({"train_csv", cfg.train_csv, hex64(hash_file(cfg.train_csv))});
  if (!cfg.test_csv.empty())
    manifest.inputs.push_back({"test_csv", cfg.test_csv, hex64(hash_file(cfg.test_csv))});
  if (!cfg.plan_path.empty())
    manifest.inputs.push_back({"plan", cfg.plan_path, hex64(hash_file(cfg.plan_path))});

  const auto persist_manifest = [&]() { write_text(path_of("manifest.json"), manifest.to_json()); };

  StageClock clock(manifest);
  try {
    // ingest
    Schema schema;
    Table train_table;
    Table test_table;
    LoadStats stats;
    clock.run("ingest", [&] {
      schema = load_schema_file(cfg.schema_path);
      CleaningPolicy policy;
      train_table = load_table(cfg.train_csv, schema, policy, cfg.header, &stats);
      test_table = cfg.test_csv.empty()
                       ? train_table
                       : load_table(cfg.test_csv, frozen_schema(train_table.schema()), policy,
                                    cfg.header);
    });

    // fit + layout
    CodecSpec codec;
    Layout layout;
    clock.run("fit", [&] { codec = fit_codec(train_table); });
    clock.run("layout", [&] {
      std::string plan_json;
      if (!cfg.plan_path.empty()) {
        std::ifstream in(cfg.plan_path);
        if (!in) throw DataError("cannot open placement plan: " + cfg.plan_path);
        std::stringstream ss;
        ss << in.rdbuf();
        plan_json = ss.str();
      }
      layout = make_layout(cfg.strategy, train_table, codec, plan_json);
      write_text(path_of("layout.txt"), layout.export_text(codec));
      manifest.artifacts.push_back("layout.txt");
    });

    // train
    TrainResult result;
    clock.run("train", [&] {
      TrainConfig tc = cfg.train;
      tc.seed = cfg.seed;
      TrainHooks hooks;  // the pipeline persists only the final checkpoint
      result = train(train_table, layout, codec, tc, hooks);
      result.checkpoint.config_echo = cfg.echo_json();

      std::string log = "epoch,mean_loss,wall_seconds\n";
      char line[96];
      for (const auto& e : result.log) {
        std::snprintf(line, sizeof(line), "%d,%.17g,%.3f\n", e.epoch, e.mean_loss,
                      e.wall_seconds);
        log += line;
      }
      write_text(path_of("loss_log.csv"), log);
      manifest.artifacts.push_back("loss_log.csv");
      save_checkpoint(result.checkpoint, path_of("checkpoint.bin"));
      manifest.artifacts.push_back("checkpoint.bin");
      if (result.diverged)
        throw NumericError("training diverged at epoch " + std::to_string(result.stop_epoch) +
                           "; last good checkpoint persisted");
    });

    // sample + decode; --no-clamp exposes the raw dynamics end to end
    std::vector<Grid> grids;
    clock.run("sample", [&] {
      grids = sample(result.checkpoint, cfg.train.sample_count, cfg.seed, 500, cfg.clamp_decode);
    });
    Table synth;
    clock.run("decode", [&] {
      DecodeOptions dopts;
      dopts.clamp = cfg.clamp_decode;
      synth = decode_grids(grids, layout, codec, dopts);
      write_csv(synth, path_of("synthetic.csv"));
      manifest.artifacts.push_back("synthetic.csv");
    });

    // audit
    clock.run("audit", [&] {
      AuditOptions opts = cfg.audit;
      opts.seed = cfg.seed;
      opts.layout_name = to_string(cfg.strategy);
      opts.raw_rows = stats.raw_rows;
      opts.dropped_rows = stats.dropped_rows;
      if (cfg.test_csv.empty()) opts.run_tstr = false;
      const AuditReport report = run_audit(train_table, test_table, synth, opts, &codec);
      write_text(path_of("audit.json"), report.to_json());
      manifest.artifacts.push_back("audit.json");
      write_text(path_of("audit.md"), report.to_markdown());
      manifest.artifacts.push_back("audit.md");
    });
  } catch (...) {
    persist_manifest();
    throw;
  }

  persist_manifest();
  return manifest;
}

AuditReport cmd_audit(const std::string& schema_path, const std::string& train_csv,
                      const std::string& test_csv, const std::string& synth_csv,
                      const AuditOptions& opts, bool header) {
  const Schema schema = load_schema_file(schema_path);
  CleaningPolicy policy;
  LoadStats stats;
  const Table real_train = load_table(train_csv, schema, policy, header, &stats);
  const Schema frozen = frozen_schema(real_train.schema());
  const Table real_test =
      test_csv.empty() ? real_train : load_table(test_csv, frozen, policy, header);
  const Table synth = load_table(synth_csv, frozen, policy, header);

  AuditOptions local = opts;
  local.raw_rows = stats.raw_rows;
  local.dropped_rows = stats.dropped_rows;
  if (test_csv.empty()) local.run_tstr = false;
  const CodecSpec codec = fit_codec(real_train);
  return run_audit(real_train, real_test, synth, local, &codec);
}

GradCheckResult cmd_gradcheck(uint64_t seed, int count, double fault_scale) {
  nn::UNetConfig netcfg;
  netcfg.base_channels = 8;
  netcfg.time_dim = 16;
  netcfg.seed = seed;
  netcfg.zero_init_head = false;
  nn::UNet<double> net(netcfg);
  net.randomize(seed);

  const NoiseSchedule schedule = NoiseSchedule::linear(50);
  CounterRng rng(seed, {CounterRng::label("gradcheck-data")});
  nn::MatX<double> x0(kGridCells, 4);
  for (Eigen::Index j = 0; j < x0.cols(); ++j)
    for (Eigen::Index i = 0; i < x0.rows(); ++i) x0(i, j) = 2.0 * rng.uniform() - 1.0;
  const NoisedBatch<double> batch = make_noised_batch(x0, schedule, seed, 0, 0);
  return grad_check(net, batch, count, seed, fault_scale);
}

}  // namespace tabdiff
