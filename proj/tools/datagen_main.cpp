#include "tabdiff/datagen.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace tabdiff;

namespace {

void write_file(const std::string& path, const std::string& text, bool force) {
  if (!force && fs::exists(path))
    throw UsageError("refusing to overwrite " + path + " (use --force)");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic dataset generator: census-style stand-in and toy fixtures"};
  std::string out_dir;
  uint64_t seed = 7;
  long train_rows = 32561, test_rows = 16281, toy_train = 500, toy_test = 200;
  bool force = false;
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--train-rows", train_rows, "census train rows");
  app.add_option("--test-rows", test_rows, "census test rows");
  app.add_option("--toy-train-rows", toy_train, "toy train rows");
  app.add_option("--toy-test-rows", toy_test, "toy test rows");
  app.add_flag("--force", force, "overwrite existing outputs");

  try {
    app.parse(argc, argv);

    fs::create_directories(out_dir);
    const auto path_of = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

    write_file(path_of("adult_schema.json"), datagen::census_schema_config(), force);
    write_file(path_of("adult_manual_plan.json"), datagen::census_manual_plan_json(), force);

    datagen::CensusOptions copts;
    copts.seed = seed;
    copts.rows = train_rows;
    if (!force && fs::exists(path_of("adult_train.csv")))
      throw UsageError("refusing to overwrite " + path_of("adult_train.csv") + " (use --force)");
    const datagen::CensusStats train_stats =
        datagen::write_census_csv(path_of("adult_train.csv"), copts);
    copts.rows = test_rows;
    copts.test_split = true;
    if (!force && fs::exists(path_of("adult_test.csv")))
      throw UsageError("refusing to overwrite " + path_of("adult_test.csv") + " (use --force)");
    datagen::write_census_csv(path_of("adult_test.csv"), copts);

    datagen::ToyOptions topts;
    topts.seed = seed;
    topts.rows = toy_train;
    if (!force && fs::exists(path_of("toy_train.csv")))
      throw UsageError("refusing to overwrite " + path_of("toy_train.csv") + " (use --force)");
    datagen::write_toy_csv(path_of("toy_train.csv"), topts);
    topts.rows = toy_test;
    topts.test_split = true;
    if (!force && fs::exists(path_of("toy_test.csv")))
      throw UsageError("refusing to overwrite " + path_of("toy_test.csv") + " (use --force)");
    datagen::write_toy_csv(path_of("toy_test.csv"), topts);

    write_file(path_of("toy_schema.json"), datagen::toy_schema_config(), force);

    std::printf("census train: %ld rows, %ld clean; clean-subset shares: >50K %.4f%%, "
                "Married-civ-spouse %.4f%%, Husband %.4f%%\n",
                train_stats.rows, train_stats.clean_rows,
                100.0 * train_stats.gt50 / train_stats.clean_rows,
                100.0 * train_stats.married / train_stats.clean_rows,
                100.0 * train_stats.husband / train_stats.clean_rows);
    std::printf("wrote 7 files under %s\n", out_dir.c_str());
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
