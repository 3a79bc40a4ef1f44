#include <doctest.h>

#include "tabdiff/datagen.hpp"
#include "tabdiff/diffusion.hpp"
#include "tabdiff/schema.hpp"

#include "test_util.hpp"

#include <cmath>
#include <string>
#include <vector>

using namespace tabdiff;
using namespace tabdiff::datagen;

namespace {

struct ToyFixture {
  testutil::TempDir tmp;
  Table table;
  CodecSpec codec;
  Layout layout;

  explicit ToyFixture(long rows, uint64_t seed = 11) {
    ToyOptions o;
    o.rows = rows;
    o.seed = seed;
    const std::string csv = tmp.file("toy.csv");
    write_toy_csv(csv, o);
    table = load_table(csv, toy_schema());
    codec = fit_codec(table);
    layout = baseline_layout(codec);
  }
};

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-3;
  cfg.seed = 9;
  cfg.sample_every = 1;
  cfg.timesteps = 25;
  cfg.base_channels = 2;
  cfg.time_dim = 8;
  return cfg;
}

bool same_tensors(const Checkpoint& a, const Checkpoint& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].name != b.tensors[i].name) return false;
    if (a.tensors[i].data != b.tensors[i].data) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("linear schedule endpoints scale with the step count") {
  const NoiseSchedule s1000 = NoiseSchedule::linear(1000);
  CHECK(s1000.T == 1000);
  CHECK(s1000.beta[0] == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(s1000.beta[999] == doctest::Approx(0.02).epsilon(1e-12));

  const NoiseSchedule s100 = NoiseSchedule::linear(100);
  CHECK(s100.beta[0] == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(s100.beta[99] == doctest::Approx(0.2).epsilon(1e-12));

  for (const NoiseSchedule* s : {&s1000, &s100}) {
    // alpha / alphabar recomputed from beta
    double running = 1.0;
    for (int t = 1; t <= s->T; ++t) {
      CHECK(s->alpha[t - 1] == doctest::Approx(1.0 - s->beta[t - 1]).epsilon(1e-15));
      running *= s->alpha[t - 1];
      CHECK(s->alphabar[t - 1] == doctest::Approx(running).epsilon(1e-12));
    }
    CHECK(s->alphabar[s->T - 1] < 0.05);  // near-total signal destruction
    CHECK_NOTHROW(s->validate());
  }
}

TEST_CASE("schedules too short for a valid variance are rejected") {
  // At T=20 the scaled terminal beta reaches 1.0; the chain is degenerate.
  CHECK_THROWS_AS(NoiseSchedule::linear(20).validate(), DataError);
  CHECK_NOTHROW(NoiseSchedule::linear(25).validate());
  CHECK(NoiseSchedule::linear(25).alphabar[24] < 0.05);
}

TEST_CASE("forward noising applies the closed-form mixture") {
  const NoiseSchedule sched = NoiseSchedule::linear(100);
  CounterRng rng(5, {CounterRng::label("fixture")});
  Grid x0(kGridHeight, kGridWidth), eps(kGridHeight, kGridWidth);
  for (int r = 0; r < kGridHeight; ++r)
    for (int c = 0; c < kGridWidth; ++c) {
      x0(r, c) = rng.normal();
      eps(r, c) = rng.normal();
    }
  for (int t : {1, 37, 100}) {
    const Grid xt = forward_noise(x0, t, eps, sched);
    const double a = std::sqrt(sched.alphabar[t - 1]);
    const double b = std::sqrt(1.0 - sched.alphabar[t - 1]);
    CHECK((xt - (a * x0 + b * eps)).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("noised batches draw valid steps and are item-addressed") {
  const NoiseSchedule sched = NoiseSchedule::linear(50);
  nn::MatX<double> x0(kGridCells, 40);
  CounterRng rng(6, {CounterRng::label("fixture")});
  for (Eigen::Index j = 0; j < x0.cols(); ++j)
    for (Eigen::Index i = 0; i < x0.rows(); ++i) x0(i, j) = rng.normal();

  const auto a = make_noised_batch<double>(x0, sched, 7, 3, 2);
  REQUIRE(a.t.size() == 40);
  int distinct = 0;
  std::vector<bool> seen(static_cast<size_t>(sched.T) + 1, false);
  for (int t : a.t) {
    REQUIRE(t >= 1);
    REQUIRE(t <= sched.T);
    if (!seen[static_cast<size_t>(t)]) {
      seen[static_cast<size_t>(t)] = true;
      ++distinct;
    }
  }
  CHECK(distinct > 10);  // 40 draws from [1,50] cover a spread of levels

  // xt recomputed from (x0, eps, t)
  for (Eigen::Index j = 0; j < x0.cols(); ++j) {
    const double sab = std::sqrt(sched.alphabar[a.t[static_cast<size_t>(j)] - 1]);
    const double somab = std::sqrt(1.0 - sched.alphabar[a.t[static_cast<size_t>(j)] - 1]);
    CHECK((a.xt.col(j) - (sab * x0.col(j) + somab * a.eps.col(j))).cwiseAbs().maxCoeff() <
          1e-15);
  }

  // a sub-range re-noised with the matching item base reproduces the slice
  const auto b = make_noised_batch<double>(x0.middleCols(10, 4), sched, 7, 3, 2, 10);
  CHECK(b.xt == a.xt.middleCols(10, 4));
  CHECK(b.eps == a.eps.middleCols(10, 4));
  for (int i = 0; i < 4; ++i)
    CHECK(b.t[static_cast<size_t>(i)] == a.t[static_cast<size_t>(i) + 10]);

  // identical keys reproduce; any key change decorrelates
  const auto a2 = make_noised_batch<double>(x0, sched, 7, 3, 2);
  CHECK(a2.xt == a.xt);
  const auto c = make_noised_batch<double>(x0, sched, 7, 4, 2);
  CHECK(c.xt != a.xt);
  const auto d = make_noised_batch<double>(x0, sched, 8, 3, 2);
  CHECK(d.xt != a.xt);
}

TEST_CASE("batch loss of a zero predictor is the mean squared noise") {
  const NoiseSchedule sched = NoiseSchedule::linear(100);
  nn::MatX<double> x0 = nn::MatX<double>::Zero(kGridCells, 200);
  const auto batch = make_noised_batch<double>(x0, sched, 13, 1, 0);

  auto zero_pred = [](const nn::MatX<double>& xt, const std::vector<int>&) {
    return nn::MatX<double>::Zero(xt.rows(), xt.cols()).eval();
  };
  const double loss = batch_loss(batch, zero_pred);
  CHECK(loss == batch.eps.squaredNorm() / static_cast<double>(batch.eps.size()));
  CHECK(loss == doctest::Approx(1.0).epsilon(0.05));  // noise is unit-variance

  nn::MatX<double> empty(kGridCells, 0);
  const auto none = make_noised_batch<double>(empty, sched, 13, 1, 0);
  CHECK_THROWS_AS(batch_loss(none, zero_pred), DataError);

  auto nan_pred = [](const nn::MatX<double>& xt, const std::vector<int>&) {
    nn::MatX<double> p = nn::MatX<double>::Zero(xt.rows(), xt.cols());
    p(0, 0) = std::nan("");
    return p;
  };
  CHECK_THROWS_AS(batch_loss(batch, nan_pred), NumericError);
}

TEST_CASE("training is deterministic run to run") {
  ToyFixture fx(80);
  const TrainConfig cfg = tiny_train_config();

  const TrainResult r1 = train(fx.table, fx.layout, fx.codec, cfg);
  const TrainResult r2 = train(fx.table, fx.layout, fx.codec, cfg);

  CHECK_FALSE(r1.diverged);
  REQUIRE(r1.log.size() == 2);
  REQUIRE(r2.log.size() == 2);
  for (size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].epoch == static_cast<int>(i) + 1);
    CHECK(r1.log[i].mean_loss == r2.log[i].mean_loss);
    CHECK(std::isfinite(r1.log[i].mean_loss));
  }
  CHECK(same_tensors(r1.checkpoint, r2.checkpoint));
  CHECK(r1.checkpoint.codec_fingerprint == fx.codec.fingerprint());
  CHECK(r1.checkpoint.layout_fingerprint == fx.layout.fingerprint());
  CHECK(r1.parameter_count > 0);

  // the zero-initialized head makes the first batch predict zero, so the
  // first-epoch mean loss starts near E[eps^2] = 1
  CHECK(r1.log[0].mean_loss > 0.5);
  CHECK(r1.log[0].mean_loss < 2.0);
}

TEST_CASE("snapshot hooks fire at the requested cadence") {
  ToyFixture fx(64);
  TrainConfig cfg = tiny_train_config();
  cfg.epochs = 5;
  cfg.sample_every = 2;

  std::vector<int> snap_epochs;
  std::vector<int> log_epochs;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& l) { log_epochs.push_back(l.epoch); };
  hooks.on_snapshot = [&](int epoch, const Checkpoint&) { snap_epochs.push_back(epoch); };
  const TrainResult r = train(fx.table, fx.layout, fx.codec, cfg, hooks);

  CHECK(log_epochs == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(snap_epochs == std::vector<int>{2, 4, 5});  // cadence plus the final epoch
  CHECK(r.log.size() == 5);
}

TEST_CASE("zero epochs yields the untrained net and an empty log") {
  ToyFixture fx(48);
  TrainConfig cfg = tiny_train_config();
  cfg.epochs = 0;

  int snaps = 0;
  TrainHooks hooks;
  hooks.on_snapshot = [&](int epoch, const Checkpoint&) {
    CHECK(epoch == 0);
    ++snaps;
  };
  const TrainResult r = train(fx.table, fx.layout, fx.codec, cfg, hooks);
  CHECK(snaps == 1);
  CHECK(r.log.empty());
  CHECK_FALSE(r.diverged);

  nn::UNetConfig ncfg;
  ncfg.base_channels = cfg.base_channels;
  ncfg.time_dim = cfg.time_dim;
  ncfg.seed = cfg.seed;
  nn::UNet<float> fresh(ncfg);
  Checkpoint want;
  snapshot_params(fresh, want);
  CHECK(same_tensors(r.checkpoint, want));
}

TEST_CASE("a divergent run stops and hands back the last good weights") {
  ToyFixture fx(80);
  TrainConfig cfg = tiny_train_config();
  cfg.epochs = 3;
  cfg.learning_rate = 1e25;  // first optimizer step catapults the weights

  const TrainResult r = train(fx.table, fx.layout, fx.codec, cfg);
  CHECK(r.diverged);
  CHECK(r.stop_epoch == 1);
  CHECK(r.log.empty());  // the broken epoch never logs

  for (const auto& blob : r.checkpoint.tensors)
    for (double v : blob.data) REQUIRE(std::isfinite(v));

  // stop in epoch one means the checkpoint is the untouched initial net
  nn::UNetConfig ncfg;
  ncfg.base_channels = cfg.base_channels;
  ncfg.time_dim = cfg.time_dim;
  ncfg.seed = cfg.seed;
  nn::UNet<float> fresh(ncfg);
  Checkpoint want;
  snapshot_params(fresh, want);
  CHECK(same_tensors(r.checkpoint, want));
}

TEST_CASE("sampling is deterministic and batch-size invariant") {
  ToyFixture fx(64);
  TrainConfig cfg = tiny_train_config();
  cfg.epochs = 1;
  const TrainResult r = train(fx.table, fx.layout, fx.codec, cfg);

  const std::vector<Grid> a = sample(r.checkpoint, 7, 21);
  const std::vector<Grid> b = sample(r.checkpoint, 7, 21);
  const std::vector<Grid> c = sample(r.checkpoint, 7, 21, 3);  // forced small batches
  REQUIRE(a.size() == 7);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i] == c[i]);
  }
  const std::vector<Grid> d = sample(r.checkpoint, 7, 22);
  CHECK(a[0] != d[0]);

  for (const Grid& g : a) {
    CHECK(g.maxCoeff() <= 1.0);
    CHECK(g.minCoeff() >= -1.0);
  }

  // raw dynamics differ only by the final clamp
  const std::vector<Grid> raw = sample(r.checkpoint, 7, 21, 500, false);
  for (size_t i = 0; i < a.size(); ++i) {
    const Grid clamped = raw[i].cwiseMax(-1.0).cwiseMin(1.0);
    CHECK((clamped - a[i]).cwiseAbs().maxCoeff() == 0.0);
  }

  CHECK_THROWS_AS(sample(r.checkpoint, 0, 21), UsageError);
  CHECK_THROWS_AS(sample(r.checkpoint, 5, 21, 0), UsageError);
}

TEST_CASE("analytic gradients match finite differences across the whole net") {
  nn::UNetConfig ncfg;
  ncfg.base_channels = 1;
  ncfg.time_dim = 4;
  ncfg.seed = 17;
  ncfg.zero_init_head = false;  // every path must carry signal
  nn::UNet<double> net(ncfg);

  const NoiseSchedule sched = NoiseSchedule::linear(50);
  nn::MatX<double> x0(kGridCells, 2);
  CounterRng rng(18, {CounterRng::label("gradcheck-data")});
  for (Eigen::Index j = 0; j < x0.cols(); ++j)
    for (Eigen::Index i = 0; i < x0.rows(); ++i) x0(i, j) = rng.normal();
  const auto batch = make_noised_batch<double>(x0, sched, 19, 1, 0);

  const int total = static_cast<int>(net.parameter_count());
  const GradCheckResult all = grad_check(net, batch, total + 100, 23);
  CHECK(all.checked == total);
  CHECK(all.max_rel_error < 1e-3);
  CHECK(all.max_rel_error >= 0.0);

  const GradCheckResult some = grad_check(net, batch, 50, 23);
  CHECK(some.checked == 50);
  CHECK(some.max_rel_error < 1e-3);

  CHECK_THROWS_AS(grad_check(net, batch, 0, 23), UsageError);

  // fault injection: corrupting one analytic gradient must be caught
  const GradCheckResult faulty = grad_check(net, batch, total, 23, 25.0);
  CHECK(faulty.max_rel_error > 1e-3);
}

TEST_CASE("snapshot and restore carry exact weights between nets") {
  nn::UNetConfig a_cfg;
  a_cfg.base_channels = 2;
  a_cfg.time_dim = 8;
  a_cfg.seed = 31;
  a_cfg.zero_init_head = false;
  nn::UNet<double> a(a_cfg);

  Checkpoint ck;
  snapshot_params(a, ck);

  nn::UNetConfig b_cfg = a_cfg;
  b_cfg.seed = 32;  // different init, then overwritten by the restore
  nn::UNet<double> b(b_cfg);
  restore_params(ck, b);

  nn::MatX<double> x(kGridCells, 2);
  CounterRng rng(33, {CounterRng::label("fixture")});
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = rng.normal();
  const nn::MatX<double> ya = a.forward(x, {3, 9}, false);
  const nn::MatX<double> yb = b.forward(x, {3, 9}, false);
  CHECK(ya == yb);

  // a structurally different net rejects the restore
  nn::UNetConfig c_cfg = a_cfg;
  c_cfg.base_channels = 4;
  nn::UNet<double> c(c_cfg);
  CHECK_THROWS_AS(restore_params(ck, c), DataError);
}

TEST_CASE("grid encoding flattens rows in layout order") {
  ToyFixture fx(12);
  const nn::MatX<float> grids = encode_grids<float>(fx.table, fx.layout, fx.codec);
  REQUIRE(grids.rows() == kGridCells);
  REQUIRE(grids.cols() == fx.table.rows());
  for (Eigen::Index r = 0; r < 3; ++r) {
    const Grid g = vector_to_grid(encode_row(fx.table, r, fx.codec), fx.layout);
    for (int row = 0; row < kGridHeight; ++row)
      for (int col = 0; col < kGridWidth; ++col)
        CHECK(grids(static_cast<Eigen::Index>(row) * kGridWidth + col, r) ==
              static_cast<float>(g(row, col)));
  }
}
