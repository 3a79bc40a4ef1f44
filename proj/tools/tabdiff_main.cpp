#include "tabdiff/checkpoint.hpp"
#include "tabdiff/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace tabdiff;

namespace {

struct Opts {
  std::string schema, train_csv, test_csv, synth_csv, plan, checkpoint, out, label;
  std::string layout_name = "baseline";
  uint64_t seed = 0;
  long rows = 5000;
  int epochs = 50, timesteps = 1000, batch_size = 64, base_channels = 32, time_dim = 64;
  int sample_every = 5, count = 256;
  double learning_rate = 1e-4, weight_decay = 0.01, threshold = 1e-3, fault_scale = 1.0;
  bool no_clamp = false, no_header = false, force = false;
};

void ensure_writable(const std::string& path, bool force) {
  if (!force && fs::exists(path))
    throw UsageError("refusing to overwrite " + path + " (use --force)");
}

void write_or_print(const std::string& out, bool force, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  ensure_writable(out, force);
  std::ofstream f(out, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + out);
  f << text;
  if (!f) throw DataError("write failed: " + out);
  std::cout << "wrote " << out << "\n";
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TrainConfig train_config(const Opts& o) {
  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.learning_rate = o.learning_rate;
  tc.weight_decay = o.weight_decay;
  tc.seed = o.seed;
  tc.sample_every = o.sample_every;
  tc.sample_count = static_cast<int>(o.rows);
  tc.timesteps = o.timesteps;
  tc.base_channels = o.base_channels;
  tc.time_dim = o.time_dim;
  return tc;
}

TrainHooks progress_hooks(int epochs) {
  TrainHooks hooks;
  hooks.on_epoch = [epochs](const EpochLog& e) {
    std::printf("epoch %d/%d  mean loss %.6f  (%.1fs)\n", e.epoch, epochs, e.mean_loss,
                e.wall_seconds);
    std::fflush(stdout);
  };
  return hooks;
}

void print_optimizer_note(const TrainConfig& tc) {
  std::printf("optimizer: AdamW lr=%g weight_decay=%g batch=%d (stand-ins for unstated library "
              "defaults)\n",
              tc.learning_rate, tc.weight_decay, tc.batch_size);
}

void cmd_fit(const Opts& o) {
  const Schema schema = load_schema_file(o.schema);
  const Table table = load_table(o.train_csv, schema, {}, !o.no_header);
  const CodecSpec codec = fit_codec(table);
  write_or_print(o.out, o.force, codec.to_json_text());
}

void cmd_layout(const Opts& o) {
  const Schema schema = load_schema_file(o.schema);
  const Table table = load_table(o.train_csv, schema, {}, !o.no_header);
  const CodecSpec codec = fit_codec(table);
  const LayoutStrategy strategy = layout_strategy_from_string(o.layout_name);
  if (strategy == LayoutStrategy::Manual && o.plan.empty())
    throw UsageError("the manual strategy requires a placement plan (--plan)");
  const Layout layout =
      make_layout(strategy, table, codec, o.plan.empty() ? std::string() : read_text(o.plan));
  write_or_print(o.out, o.force, layout.export_text(codec));
}

void cmd_train(const Opts& o) {
  if (o.out.empty()) throw UsageError("an output directory is required (--out)");
  const LayoutStrategy strategy = layout_strategy_from_string(o.layout_name);
  if (strategy == LayoutStrategy::Manual && o.plan.empty())
    throw UsageError("the manual strategy requires a placement plan (--plan)");
  fs::create_directories(o.out);
  const std::string layout_path = (fs::path(o.out) / "layout.txt").string();
  const std::string log_path = (fs::path(o.out) / "loss_log.csv").string();
  const std::string ckpt_path = (fs::path(o.out) / "checkpoint.bin").string();
  for (const auto& p : {layout_path, log_path, ckpt_path}) ensure_writable(p, o.force);

  const Schema schema = load_schema_file(o.schema);
  const Table table = load_table(o.train_csv, schema, {}, !o.no_header);
  const CodecSpec codec = fit_codec(table);
  const Layout layout =
      make_layout(strategy, table, codec, o.plan.empty() ? std::string() : read_text(o.plan));
  {
    std::ofstream f(layout_path, std::ios::binary);
    f << layout.export_text(codec);
  }

  const TrainConfig tc = train_config(o);
  print_optimizer_note(tc);
  const TrainResult result = train(table, layout, codec, tc, progress_hooks(tc.epochs));

  std::ofstream log(log_path, std::ios::binary);
  log << "epoch,mean_loss,wall_seconds\n";
  char line[96];
  for (const auto& e : result.log) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.3f\n", e.epoch, e.mean_loss, e.wall_seconds);
    log << line;
  }
  log.close();
  save_checkpoint(result.checkpoint, ckpt_path);
  std::printf("wrote %s (%lld parameters)\n", ckpt_path.c_str(),
              static_cast<long long>(result.parameter_count));
  if (result.diverged)
    throw NumericError("training diverged at epoch " + std::to_string(result.stop_epoch) +
                       "; last good checkpoint persisted");
}

void cmd_sample(const Opts& o) {
  if (o.out.empty()) throw UsageError("an output CSV path is required (--out)");
  ensure_writable(o.out, o.force);
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  const CodecSpec codec = CodecSpec::from_json_text(ckpt.codec_json);
  const Layout layout = Layout::from_json_text(ckpt.layout_json);
  const std::vector<Grid> grids = sample(ckpt, static_cast<int>(o.rows), o.seed, 500, !o.no_clamp);
  DecodeOptions dopts;
  dopts.clamp = !o.no_clamp;
  const Table synth = decode_grids(grids, layout, codec, dopts);
  write_csv(synth, o.out);
  std::cout << "wrote " << o.out << " (" << synth.rows() << " rows)\n";
}

void cmd_audit_cli(const Opts& o) {
  AuditOptions opts;
  opts.seed = o.seed;
  opts.layout_name = o.label;
  const AuditReport report =
      cmd_audit(o.schema, o.train_csv, o.test_csv, o.synth_csv, opts, !o.no_header);
  if (o.out.empty()) {
    std::cout << report.to_markdown();
    return;
  }
  fs::create_directories(o.out);
  const std::string json_path = (fs::path(o.out) / "audit.json").string();
  const std::string md_path = (fs::path(o.out) / "audit.md").string();
  ensure_writable(json_path, o.force);
  ensure_writable(md_path, o.force);
  std::ofstream(json_path, std::ios::binary) << report.to_json();
  std::ofstream(md_path, std::ios::binary) << report.to_markdown();
  std::cout << "wrote " << json_path << " and " << md_path << "\n";
}

void cmd_pipeline_cli(const Opts& o) {
  RunConfig cfg;
  cfg.schema_path = o.schema;
  cfg.train_csv = o.train_csv;
  cfg.test_csv = o.test_csv;
  cfg.strategy = layout_strategy_from_string(o.layout_name);
  cfg.plan_path = o.plan;
  cfg.train = train_config(o);
  cfg.out_dir = o.out;
  cfg.seed = o.seed;
  cfg.clamp_decode = !o.no_clamp;
  cfg.header = !o.no_header;
  cfg.force = o.force;
  print_optimizer_note(cfg.train);
  const RunManifest manifest = cmd_pipeline(cfg);
  for (const auto& s : manifest.stages)
    std::printf("stage %-8s %8.2fs\n", s.stage.c_str(), s.seconds);
  for (const auto& a : manifest.artifacts)
    std::cout << "artifact: " << (fs::path(o.out) / a).string() << "\n";
}

void cmd_gradcheck_cli(const Opts& o) {
  const GradCheckResult result = cmd_gradcheck(o.seed, o.count, o.fault_scale);
  std::printf("max relative error %.3e over %d parameters (threshold %.1e)\n",
              result.max_rel_error, result.checked, o.threshold);
  if (!(result.max_rel_error < o.threshold))
    throw NumericError("gradient check failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tabular diffusion toolkit: pseudo-image encoding, U-Net denoiser, audits"};
  app.require_subcommand(1);
  Opts o;

  const auto add_data_flags = [&](CLI::App* cmd, bool need_train) {
    cmd->add_option("--schema", o.schema, "schema config (JSON)")->required();
    auto* t = cmd->add_option("--train-csv", o.train_csv, "training CSV");
    if (need_train) t->required();
    cmd->add_flag("--no-header", o.no_header, "input CSVs have no header row");
  };

  auto* fit = app.add_subcommand("fit", "fit the feature codec and print/write it");
  add_data_flags(fit, true);
  fit->add_option("--out", o.out, "output path (stdout when omitted)");
  fit->add_flag("--force", o.force, "overwrite existing outputs");
  fit->callback([&] { cmd_fit(o); });

  auto* layout = app.add_subcommand("layout", "compute a feature layout and print/write it");
  add_data_flags(layout, true);
  layout->add_option("--layout", o.layout_name, "baseline|clustered|manual");
  layout->add_option("--plan", o.plan, "placement plan (manual strategy)");
  layout->add_option("--out", o.out, "output path (stdout when omitted)");
  layout->add_flag("--force", o.force, "overwrite existing outputs");
  layout->callback([&] { cmd_layout(o); });

  auto* train = app.add_subcommand("train", "train the denoiser and write a checkpoint");
  add_data_flags(train, true);
  train->add_option("--layout", o.layout_name, "baseline|clustered|manual");
  train->add_option("--plan", o.plan, "placement plan (manual strategy)");
  train->add_option("--epochs", o.epochs, "training epochs");
  train->add_option("--timesteps", o.timesteps, "diffusion steps T");
  train->add_option("--batch-size", o.batch_size, "optimizer batch size");
  train->add_option("--learning-rate,--lr", o.learning_rate, "AdamW learning rate");
  train->add_option("--weight-decay", o.weight_decay, "AdamW decoupled weight decay");
  train->add_option("--base-channels", o.base_channels, "U-Net stem width");
  train->add_option("--time-dim", o.time_dim, "timestep embedding width");
  train->add_option("--sample-every", o.sample_every, "epochs between snapshot hooks");
  train->add_option("--seed", o.seed, "run seed")->required();
  train->add_option("--out", o.out, "output directory")->required();
  train->add_flag("--force", o.force, "overwrite existing outputs");
  train->callback([&] { cmd_train(o); });

  auto* sample = app.add_subcommand("sample", "draw rows from a checkpoint");
  sample->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  sample->add_option("--rows", o.rows, "rows to sample");
  sample->add_option("--seed", o.seed, "sampling seed")->required();
  sample->add_option("--out", o.out, "output CSV")->required();
  sample->add_flag("--no-clamp", o.no_clamp, "skip the final [-1,1] clamp; decode the raw dynamics");
  sample->add_flag("--force", o.force, "overwrite existing outputs");
  sample->callback([&] { cmd_sample(o); });

  auto* audit = app.add_subcommand("audit", "audit a synthetic CSV against real data");
  add_data_flags(audit, true);
  audit->add_option("--test-csv", o.test_csv, "held-out real CSV (enables TSTR)");
  audit->add_option("--synth-csv", o.synth_csv, "synthetic CSV to audit")->required();
  audit->add_option("--label", o.label, "layout label echoed into the report");
  audit->add_option("--seed", o.seed, "audit seed");
  audit->add_option("--out", o.out, "output directory (stdout markdown when omitted)");
  audit->add_flag("--force", o.force, "overwrite existing outputs");
  audit->callback([&] { cmd_audit_cli(o); });

  auto* pipeline = app.add_subcommand("pipeline", "full run: ingest through audit");
  add_data_flags(pipeline, true);
  pipeline->add_option("--test-csv", o.test_csv, "held-out real CSV (enables TSTR)");
  pipeline->add_option("--layout", o.layout_name, "baseline|clustered|manual");
  pipeline->add_option("--plan", o.plan, "placement plan (manual strategy)");
  pipeline->add_option("--epochs", o.epochs, "training epochs");
  pipeline->add_option("--timesteps", o.timesteps, "diffusion steps T");
  pipeline->add_option("--rows", o.rows, "rows to sample");
  pipeline->add_option("--batch-size", o.batch_size, "optimizer batch size");
  pipeline->add_option("--learning-rate,--lr", o.learning_rate, "AdamW learning rate");
  pipeline->add_option("--weight-decay", o.weight_decay, "AdamW decoupled weight decay");
  pipeline->add_option("--base-channels", o.base_channels, "U-Net stem width");
  pipeline->add_option("--time-dim", o.time_dim, "timestep embedding width");
  pipeline->add_option("--sample-every", o.sample_every, "epochs between snapshot hooks");
  pipeline->add_option("--seed", o.seed, "run seed")->required();
  pipeline->add_option("--out", o.out, "output directory")->required();
  pipeline->add_flag("--no-clamp", o.no_clamp, "skip the final [-1,1] clamp; decode the raw dynamics");
  pipeline->add_flag("--force", o.force, "overwrite existing outputs");
  pipeline->callback([&] { cmd_pipeline_cli(o); });

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--seed", o.seed, "net/batch seed");
  gradcheck->add_option("--count", o.count, "parameters to probe");
  gradcheck->add_option("--threshold", o.threshold, "max allowed relative error");
  gradcheck->add_option("--fault-scale", o.fault_scale, "fault-injection hook (tests)")
      ->group("");  // hidden
  gradcheck->callback([&] { cmd_gradcheck_cli(o); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
