#pragma once

#include "tabdiff/codec.hpp"
#include "tabdiff/common.hpp"
#include "tabdiff/layout.hpp"
#include "tabdiff/nn.hpp"
#include "tabdiff/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace tabdiff {

// Linear variance schedule. Endpoints are the standard 1e-4..0.02 scaled by
// 1000/T so the terminal signal level stays the same when T is reduced for
// fast runs; alphabar_T < 0.05 holds for every supported T.
struct NoiseSchedule {
  int T = 0;
  Vector beta;      // index t-1 holds step t
  Vector alpha;     // 1 - beta
  Vector alphabar;  // running product of alpha

  static NoiseSchedule linear(int T);
  void validate() const;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  uint64_t seed = 0;
  int sample_every = 5;    // epochs between checkpoint snapshots
  int sample_count = 5000;
  int timesteps = 1000;
  int base_channels = 32;
  int time_dim = 64;

  void validate() const;  // positive counts/rates; epochs >= 0
};

// Serializable training artifact: network weights plus everything needed to
// decode its samples (schedule, codec, layout) and reproduce the run.
struct Checkpoint {
  std::string dtype = "f32";  // scalar width of the tensor payload on disk
  int grid_height = kGridHeight;
  int grid_width = kGridWidth;
  int base_channels = 0;
  int time_dim = 0;
  NoiseSchedule schedule;
  std::string codec_json;
  std::string layout_json;
  uint64_t codec_fingerprint = 0;
  uint64_t layout_fingerprint = 0;
  std::string config_echo;  // JSON echo of the TrainConfig and provenance

  struct TensorBlob {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;  // widened in memory; narrowed on disk per dtype
  };
  std::vector<TensorBlob> tensors;
};

// sqrt(alphabar_t) x0 + sqrt(1 - alphabar_t) eps.
Grid forward_noise(const Grid& x0, int t, const Grid& eps, const NoiseSchedule& schedule);

// A batch of grids flattened one-per-column (row-major cells) with its drawn
// timesteps and noise.
template <class S>
struct NoisedBatch {
  nn::MatX<S> x0, xt, eps;  // cells x n
  std::vector<int> t;       // n entries in [1, T]
};

// Draw (t, eps) per item from streams keyed by (seed, epoch, batch, item) and
// apply the forward process. Column i of x0 is item `item_base + i`'s clean
// grid.
template <class S>
NoisedBatch<S> make_noised_batch(const nn::MatX<S>& x0, const NoiseSchedule& schedule,
                                 uint64_t seed, long epoch, long batch, long item_base = 0) {
  NoisedBatch<S> out;
  out.x0 = x0;
  out.xt.resize(x0.rows(), x0.cols());
  out.eps.resize(x0.rows(), x0.cols());
  out.t.resize(static_cast<size_t>(x0.cols()));
  for (Eigen::Index i = 0; i < x0.cols(); ++i) {
    CounterRng rng(seed, {CounterRng::label("noise"), static_cast<uint64_t>(epoch),
                          static_cast<uint64_t>(batch), static_cast<uint64_t>(item_base + i)});
    const int t = 1 + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(schedule.T)));
    out.t[static_cast<size_t>(i)] = t;
    const S sab = static_cast<S>(std::sqrt(schedule.alphabar[t - 1]));
    const S somab = static_cast<S>(std::sqrt(1.0 - schedule.alphabar[t - 1]));
    for (Eigen::Index r = 0; r < x0.rows(); ++r) {
      const S e = static_cast<S>(rng.normal());
      out.eps(r, i) = e;
      out.xt(r, i) = sab * x0(r, i) + somab * e;
    }
  }
  return out;
}

// Mean over batch items of the per-item mean squared error against the true
// noise; `predict(xt, t)` is the denoiser (or a test stand-in).
template <class S, class Predict>
double batch_loss(const NoisedBatch<S>& batch, Predict&& predict) {
  if (batch.xt.cols() == 0) throw DataError("loss over an empty batch");
  nn::MatX<S> pred = predict(batch.xt, batch.t);
  if (!pred.allFinite()) throw NumericError("non-finite activations in the denoiser");
  return static_cast<double>((pred - batch.eps).squaredNorm()) /
         static_cast<double>(batch.eps.size());
}

struct EpochLog {
  int epoch = 0;        // 1-based
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainHooks {
  // Called after every epoch with its log entry.
  std::function<void(const EpochLog&)> on_epoch;
  // Called at sample-every boundaries and at the end with a full snapshot.
  std::function<void(int epoch, const Checkpoint&)> on_snapshot;
};

struct TrainResult {
  Checkpoint checkpoint;  // final (or last good, when diverged)
  std::vector<EpochLog> log;
  bool diverged = false;
  int stop_epoch = 0;  // epoch the divergence surfaced in (0 = none)
  Eigen::Index parameter_count = 0;
};

// Full training loop: encode rows through the layout, optimize the denoiser
// with decoupled-weight-decay Adam, log per-epoch mean loss. On a non-finite
// loss the loop stops and returns the last epoch-boundary snapshot with
// `diverged` set.
TrainResult train(const Table& table, const Layout& layout, const CodecSpec& codec,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

// Ancestral sampling from pure noise down to t=0; final grids clamped to
// [-1, 1] by default. `clamp = false` returns the raw dynamics so
// out-of-range decoding failure modes stay observable. Throws NumericError
// (with the step index) if a chain turns non-finite.
std::vector<Grid> sample(const Checkpoint& ckpt, int n, uint64_t seed, int batch_cap = 500,
                         bool clamp = true);

struct GradCheckResult {
  double max_rel_error = 0.0;
  int checked = 0;
};

// Central finite differences (step 1e-4) on `count` randomly selected
// parameters of a double-precision net against the analytic gradients.
// `fault_scale` != 1 corrupts the first tensor's analytic gradient after
// backprop — a fault-injection hook proving the check can fail.
GradCheckResult grad_check(nn::UNet<double>& net, const NoisedBatch<double>& batch, int count,
                           uint64_t seed, double fault_scale = 1.0);

// Snapshot / restore between a live net and the serializable form.
template <class S>
void snapshot_params(nn::UNet<S>& net, Checkpoint& ckpt) {
  ckpt.grid_height = net.config().grid_height;
  ckpt.grid_width = net.config().grid_width;
  ckpt.base_channels = net.config().base_channels;
  ckpt.time_dim = net.config().time_dim;
  ckpt.tensors.clear();
  for (auto* p : net.parameters()) {
    Checkpoint::TensorBlob blob;
    blob.name = p->name;
    blob.shape = p->shape;
    blob.data.resize(static_cast<size_t>(p->value.size()));
    for (Eigen::Index j = 0, k = 0; j < p->value.cols(); ++j)
      for (Eigen::Index i = 0; i < p->value.rows(); ++i, ++k)
        blob.data[static_cast<size_t>(k)] = static_cast<double>(p->value(i, j));
    ckpt.tensors.push_back(std::move(blob));
  }
}

template <class S>
void restore_params(const Checkpoint& ckpt, nn::UNet<S>& net) {
  auto& params = net.parameters();
  if (params.size() != ckpt.tensors.size())
    throw DataError("checkpoint tensor count does not match the net");
  for (size_t k = 0; k < params.size(); ++k) {
    auto* p = params[k];
    const auto& blob = ckpt.tensors[k];
    if (blob.name != p->name || static_cast<Eigen::Index>(blob.data.size()) != p->value.size())
      throw DataError("checkpoint tensor '" + blob.name + "' does not match net tensor '" +
                      p->name + "'");
    for (Eigen::Index j = 0, i = 0, k2 = 0; j < p->value.cols(); ++j)
      for (i = 0; i < p->value.rows(); ++i, ++k2)
        p->value(i, j) = static_cast<S>(blob.data[static_cast<size_t>(k2)]);
  }
}

// Flattened row-major grid of each table row, encoded through codec+layout;
// one column per row. The scalar is the training precision.
template <class S>
nn::MatX<S> encode_grids(const Table& table, const Layout& layout, const CodecSpec& codec) {
  nn::MatX<S> out(static_cast<Eigen::Index>(layout.height) * layout.width, table.rows());
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    const Grid g = vector_to_grid(encode_row(table, r, codec), layout);
    for (int row = 0; row < layout.height; ++row)
      for (int col = 0; col < layout.width; ++col)
        out(static_cast<Eigen::Index>(row) * layout.width + col, r) =
            static_cast<S>(g(row, col));
  }
  return out;
}

}  // namespace tabdiff
