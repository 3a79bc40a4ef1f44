#include "tabdiff/diffusion.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace tabdiff {

using nlohmann::json;

NoiseSchedule NoiseSchedule::linear(int T) {
  if (T < 2) throw DataError("schedule needs at least 2 steps");
  NoiseSchedule s;
  s.T = T;
  s.beta.resize(T);
  s.alpha.resize(T);
  s.alphabar.resize(T);
  // Reference endpoints at T=1000, scaled so total noise injected is
  // T-independent.
  const double scale = 1000.0 / T;
  const double b0 = 1e-4 * scale;
  const double b1 = 0.02 * scale;
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    s.beta[t] = b0 + (b1 - b0) * t / (T - 1);
    s.alpha[t] = 1.0 - s.beta[t];
    prod *= s.alpha[t];
    s.alphabar[t] = prod;
  }
  s.validate();
  return s;
}

void NoiseSchedule::validate() const {
  if (T < 2 || beta.size() != T || alpha.size() != T || alphabar.size() != T)
    throw DataError("malformed noise schedule");
  for (int t = 0; t < T; ++t) {
    if (!(beta[t] > 0.0 && beta[t] < 1.0))
      throw DataError("beta out of (0,1) at step " + std::to_string(t + 1) +
                      " (step count too small for the linear endpoints)");
    if (t > 0 && beta[t] < beta[t - 1]) throw DataError("beta not nondecreasing");
    if (t > 0 && !(alphabar[t] < alphabar[t - 1]))
      throw DataError("alphabar not strictly decreasing");
  }
  if (!(alphabar[T - 1] < 0.05))
    throw DataError("terminal alphabar " + std::to_string(alphabar[T - 1]) + " >= 0.05");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw UsageError("epochs must be >= 0");
  if (batch_size <= 0) throw UsageError("batch size must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (weight_decay < 0.0) throw UsageError("weight decay must be >= 0");
  if (sample_every <= 0) throw UsageError("sample-every must be positive");
  if (sample_count <= 0) throw UsageError("sample-count must be positive");
  if (timesteps < 2) throw UsageError("timesteps must be >= 2");
  if (base_channels <= 0) throw UsageError("base channels must be positive");
  if (time_dim <= 0 || time_dim % 2 != 0) throw UsageError("time dim must be positive and even");
}

Grid forward_noise(const Grid& x0, int t, const Grid& eps, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.T)
    throw DataError("timestep " + std::to_string(t) + " outside [1, " +
                    std::to_string(schedule.T) + "]");
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols())
    throw DataError("noise shape does not match the grid");
  const double ab = schedule.alphabar[t - 1];
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

namespace {

std::string config_echo_json(const TrainConfig& cfg) {
  json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["weight_decay"] = cfg.weight_decay;
  j["seed"] = cfg.seed;
  j["sample_every"] = cfg.sample_every;
  j["sample_count"] = cfg.sample_count;
  j["timesteps"] = cfg.timesteps;
  j["base_channels"] = cfg.base_channels;
  j["time_dim"] = cfg.time_dim;
  return j.dump();
}

}  // namespace

TrainResult train(const Table& table, const Layout& layout, const CodecSpec& codec,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (layout.slot_count() != codec.encoded_width)
    throw DataError("layout and codec disagree on encoded width");
  if (table.rows() == 0) throw DataError("training table is empty");

  const NoiseSchedule schedule = NoiseSchedule::linear(cfg.timesteps);
  const nn::MatX<float> data = encode_grids<float>(table, layout, codec);
  const Eigen::Index n_rows = data.cols();

  nn::UNetConfig net_cfg;
  net_cfg.grid_height = layout.height;
  net_cfg.grid_width = layout.width;
  net_cfg.base_channels = cfg.base_channels;
  net_cfg.time_dim = cfg.time_dim;
  net_cfg.seed = cfg.seed;
  nn::UNet<float> net(net_cfg);
  nn::AdamW<float> opt(cfg.learning_rate, cfg.weight_decay);

  Checkpoint base;
  base.dtype = "f32";
  base.schedule = schedule;
  base.codec_json = codec.to_json_text();
  base.layout_json = layout.to_json_text();
  base.codec_fingerprint = codec.fingerprint();
  base.layout_fingerprint = layout.fingerprint();
  base.config_echo = config_echo_json(cfg);

  auto snapshot = [&]() {
    Checkpoint ck = base;
    snapshot_params(net, ck);
    return ck;
  };

  TrainResult result;
  result.parameter_count = net.parameter_count();
  Checkpoint last_good = snapshot();

  std::vector<Eigen::Index> order(static_cast<size_t>(n_rows));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    CounterRng shuffle_rng(cfg.seed, {CounterRng::label("shuffle"), static_cast<uint64_t>(epoch)});
    shuffle_rng.shuffle(order);

    double sq_err_sum = 0.0;  // summed per-item MSE
    bool finite = true;
    const long n_batches = (n_rows + cfg.batch_size - 1) / cfg.batch_size;
    for (long b = 0; b < n_batches && finite; ++b) {
      const Eigen::Index lo = static_cast<Eigen::Index>(b) * cfg.batch_size;
      const Eigen::Index m = std::min<Eigen::Index>(cfg.batch_size, n_rows - lo);
      nn::MatX<float> x0(data.rows(), m);
      for (Eigen::Index i = 0; i < m; ++i) x0.col(i) = data.col(order[lo + i]);

      NoisedBatch<float> nb = make_noised_batch<float>(x0, schedule, cfg.seed, epoch, b);
      nn::MatX<float> pred = net.forward(nb.xt, nb.t, true);
      const double loss =
          static_cast<double>((pred - nb.eps).squaredNorm()) / static_cast<double>(pred.size());
      if (!std::isfinite(loss)) {
        finite = false;
        break;
      }
      nn::MatX<float> dout = (pred - nb.eps) * (2.0f / static_cast<float>(pred.size()));
      net.zero_grad();
      net.backward(dout);
      opt.step(net.parameters());
      sq_err_sum += loss * static_cast<double>(m);
    }

    if (!finite) {
      result.diverged = true;
      result.stop_epoch = epoch;
      result.checkpoint = std::move(last_good);
      return result;
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EpochLog log{epoch, sq_err_sum / static_cast<double>(n_rows), wall};
    result.log.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log);

    last_good = snapshot();
    if (hooks.on_snapshot && (epoch % cfg.sample_every == 0 || epoch == cfg.epochs))
      hooks.on_snapshot(epoch, last_good);
  }

  result.checkpoint = std::move(last_good);
  if (cfg.epochs == 0 && hooks.on_snapshot) hooks.on_snapshot(0, result.checkpoint);
  return result;
}

std::vector<Grid> sample(const Checkpoint& ckpt, int n, uint64_t seed, int batch_cap,
                         bool clamp) {
  if (n < 1) throw UsageError("sample count must be >= 1");
  if (batch_cap < 1) throw UsageError("sample batch cap must be >= 1");
  ckpt.schedule.validate();

  nn::UNetConfig net_cfg;
  net_cfg.grid_height = ckpt.grid_height;
  net_cfg.grid_width = ckpt.grid_width;
  net_cfg.base_channels = ckpt.base_channels;
  net_cfg.time_dim = ckpt.time_dim;
  net_cfg.seed = 0;
  nn::UNet<float> net(net_cfg);
  restore_params(ckpt, net);

  const NoiseSchedule& sch = ckpt.schedule;
  const Eigen::Index cells = static_cast<Eigen::Index>(ckpt.grid_height) * ckpt.grid_width;
  std::vector<Grid> grids;
  grids.reserve(static_cast<size_t>(n));

  for (int start = 0; start < n; start += batch_cap) {
    const int m = std::min(batch_cap, n - start);
    nn::MatX<float> x(cells, m);
    for (int i = 0; i < m; ++i) {
      CounterRng rng(seed, {CounterRng::label("init"), static_cast<uint64_t>(start + i)});
      for (Eigen::Index r = 0; r < cells; ++r) x(r, i) = static_cast<float>(rng.normal());
    }

    std::vector<int> tvec(static_cast<size_t>(m));
    for (int t = sch.T; t >= 1; --t) {
      std::fill(tvec.begin(), tvec.end(), t);
      nn::MatX<float> eps_hat = net.forward(x, tvec, false);
      const float beta = static_cast<float>(sch.beta[t - 1]);
      const float inv_sqrt_alpha = static_cast<float>(1.0 / std::sqrt(sch.alpha[t - 1]));
      const float coef = static_cast<float>(sch.beta[t - 1] / std::sqrt(1.0 - sch.alphabar[t - 1]));
      x = inv_sqrt_alpha * (x - coef * eps_hat);
      if (t > 1) {
        const float sigma = std::sqrt(beta);
        for (int i = 0; i < m; ++i) {
          CounterRng rng(seed, {CounterRng::label("step"), static_cast<uint64_t>(t),
                                static_cast<uint64_t>(start + i)});
          for (Eigen::Index r = 0; r < cells; ++r)
            x(r, i) += sigma * static_cast<float>(rng.normal());
        }
      }
      if (!x.allFinite())
        throw NumericError("non-finite sample at step " + std::to_string(t));
    }

    for (int i = 0; i < m; ++i) {
      Grid g(ckpt.grid_height, ckpt.grid_width);
      for (int r = 0; r < ckpt.grid_height; ++r)
        for (int c = 0; c < ckpt.grid_width; ++c) {
          const double v =
              static_cast<double>(x(static_cast<Eigen::Index>(r) * ckpt.grid_width + c, i));
          g(r, c) = clamp ? std::clamp(v, -1.0, 1.0) : v;
        }
      grids.push_back(std::move(g));
    }
  }
  return grids;
}

GradCheckResult grad_check(nn::UNet<double>& net, const NoisedBatch<double>& batch, int count,
                           uint64_t seed, double fault_scale) {
  if (count <= 0) throw UsageError("gradient check needs a positive parameter selection");

  auto loss_of = [&]() {
    nn::MatX<double> pred = net.forward(batch.xt, batch.t, false);
    return (pred - batch.eps).squaredNorm() / static_cast<double>(pred.size());
  };

  net.zero_grad();
  nn::MatX<double> pred = net.forward(batch.xt, batch.t, true);
  nn::MatX<double> dout = (pred - batch.eps) * (2.0 / static_cast<double>(pred.size()));
  net.backward(dout);

  auto& params = net.parameters();
  if (fault_scale != 1.0 && !params.empty()) params[0]->grad *= fault_scale;
  Eigen::Index total = 0;
  for (auto* p : params) total += p->size();

  std::vector<Eigen::Index> pick(static_cast<size_t>(total));
  std::iota(pick.begin(), pick.end(), Eigen::Index{0});
  if (count < total) {
    CounterRng rng(seed, {CounterRng::label("gradcheck")});
    rng.shuffle(pick);
    pick.resize(static_cast<size_t>(count));
  }

  const double h = 1e-4;
  GradCheckResult result;
  result.checked = static_cast<int>(pick.size());
  for (Eigen::Index flat : pick) {
    // Locate (tensor, entry).
    Eigen::Index off = flat;
    size_t k = 0;
    while (off >= params[k]->size()) off -= params[k++]->size();
    double* cell = params[k]->value.data() + off;
    const double analytic = *(params[k]->grad.data() + off);

    const double orig = *cell;
    *cell = orig + h;
    const double lp = loss_of();
    *cell = orig - h;
    const double lm = loss_of();
    *cell = orig;

    const double numeric = (lp - lm) / (2.0 * h);
    const double rel =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    result.max_rel_error = std::max(result.max_rel_error, rel);
  }
  return result;
}

}  // namespace tabdiff
