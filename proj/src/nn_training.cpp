#include "waverom/nn/training.hpp"

#include <algorithm>
#include <cmath>

#include "waverom/io.hpp"
#include "waverom/rng.hpp"

namespace waverom::nn {

Adam::Adam(std::vector<Array*> params, double learning_rate, double beta1, double beta2,
           double epsilon)
    : params_(std::move(params)),
      learning_rate_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon) {
  for (Array* p : params_) {
    first_moment_.emplace_back(p->shape(), 0.0);
    second_moment_.emplace_back(p->shape(), 0.0);
  }
}

void Adam::step_with(const std::vector<const Array*>& grads) {
  if (grads.size() != params_.size()) throw ConfigError("adam: gradient count mismatch");
  ++steps_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Array& p = *params_[k];
    const Array& g = *grads[k];
    if (!p.same_shape(g)) throw ConfigError("adam: gradient shape mismatch");
    Array& m = first_moment_[k];
    Array& v = second_moment_[k];
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= learning_rate_ * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

void Adam::step(const Graph& graph) {
  std::vector<const Array*> grads;
  grads.reserve(params_.size());
  for (Array* p : params_) grads.push_back(&graph.grad_of(p));
  step_with(grads);
}

void MinMaxScaler::fit(const Matrix& data) { fit(std::vector<Matrix>{data}); }

void MinMaxScaler::fit(const std::vector<Matrix>& blocks) {
  if (blocks.empty() || blocks[0].rows() == 0) throw ConfigError("scaler: empty fit data");
  const Eigen::Index n = blocks[0].rows();
  Vector lo = blocks[0].rowwise().minCoeff();
  Vector hi = blocks[0].rowwise().maxCoeff();
  for (const auto& b : blocks) {
    if (b.rows() != n) throw ConfigError("scaler: inconsistent feature counts");
    lo = lo.cwiseMin(b.rowwise().minCoeff());
    hi = hi.cwiseMax(b.rowwise().maxCoeff());
  }
  center_ = 0.5 * (lo + hi);
  half_width_ = 0.5 * (hi - lo);
}

Matrix MinMaxScaler::transform(const Matrix& data) const {
  if (!fitted() || data.rows() != center_.size()) throw ConfigError("scaler: not fitted for data");
  Matrix out = data;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (half_width_[i] == 0.0)
      out.row(i).setZero();
    else
      out.row(i) = (out.row(i).array() - center_[i]) / half_width_[i];
  }
  return out;
}

Matrix MinMaxScaler::inverse(const Matrix& data) const {
  if (!fitted() || data.rows() != center_.size()) throw ConfigError("scaler: not fitted for data");
  Matrix out = data;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    out.row(i) = out.row(i).array() * half_width_[i] + center_[i];
  return out;
}

Vector MinMaxScaler::transform(const Vector& v) const {
  return transform(Matrix(v)).col(0);
}

Vector MinMaxScaler::inverse(const Vector& v) const { return inverse(Matrix(v)).col(0); }

void MinMaxScaler::save(const std::filesystem::path& path) const {
  Matrix packed(center_.size(), 2);
  packed.col(0) = center_;
  packed.col(1) = half_width_;
  io::write_array(path, packed);
}

MinMaxScaler MinMaxScaler::load(const std::filesystem::path& path) {
  const Matrix packed = io::read_array(path);
  MinMaxScaler s;
  s.center_ = packed.col(0);
  s.half_width_ = packed.col(1);
  return s;
}

SlidingWindowDataset build_sliding_windows(const std::vector<Matrix>& latents,
                                           const std::vector<Vector>& thetas, int window) {
  if (window < 1) throw ConfigError("sliding windows: window must be >= 1");
  if (latents.empty() || latents.size() != thetas.size())
    throw ConfigError("sliding windows: latents/thetas mismatch");
  const int q = static_cast<int>(latents[0].rows());
  const int n_t = static_cast<int>(latents[0].cols());
  const int xi = static_cast<int>(thetas[0].size());
  if (n_t <= window)
    throw ConfigError("sliding windows: need more retained steps than the window size");

  SlidingWindowDataset ds;
  ds.window = window;
  ds.per_param = n_t - window;
  ds.param_count = static_cast<int>(latents.size());
  ds.inputs = Array({ds.sample_count(), window, q + xi});
  ds.targets = Array({ds.sample_count(), q});

  int sample = 0;
  for (std::size_t j = 0; j < latents.size(); ++j) {
    const Matrix& z = latents[j];
    if (z.rows() != q || z.cols() != n_t)
      throw ConfigError("sliding windows: ragged latent blocks");
    for (int alpha = 0; alpha < ds.per_param; ++alpha, ++sample) {
      for (int s = 0; s < window; ++s) {
        double* dst = ds.inputs.data() +
                      (static_cast<Eigen::Index>(sample) * window + s) * (q + xi);
        for (int i = 0; i < q; ++i) dst[i] = z(i, alpha + s);
        for (int i = 0; i < xi; ++i) dst[q + i] = thetas[j][i];
      }
      double* t = ds.targets.data() + static_cast<Eigen::Index>(sample) * q;
      for (int i = 0; i < q; ++i) t[i] = z(i, alpha + window);
    }
  }
  return ds;
}

namespace {

// 90/10-by-parameter holdout: returns (train_params, val_params).
std::pair<std::vector<int>, std::vector<int>> split_params(int count, double val_fraction,
                                                           std::uint64_t seed) {
  Rng rng(derive_seed(seed, "split"));
  std::vector<int> order = rng.permutation(count);
  int val = static_cast<int>(std::lround(val_fraction * count));
  val = std::min(val, count - 1);
  std::vector<int> train(order.begin(), order.end() - val);
  std::vector<int> holdout(order.end() - val, order.end());
  return {train, holdout};
}

Array image_batch(const std::vector<const Matrix*>& blocks,
                  const std::vector<std::pair<int, int>>& samples, int from, int count,
                  int side) {
  Array x({count, side, side, 1});
  for (int k = 0; k < count; ++k) {
    const auto [block, col] = samples[from + k];
    const Matrix& m = *blocks[block];
    double* dst = x.data() + static_cast<Eigen::Index>(k) * side * side;
    for (int i = 0; i < side * side; ++i) dst[i] = m(i, col);
  }
  return x;
}

double cae_dataset_loss(Cae& cae, const std::vector<const Matrix*>& blocks,
                        const std::vector<std::pair<int, int>>& samples, int side) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  const int chunk = 256;
  for (int from = 0; from < static_cast<int>(samples.size()); from += chunk) {
    const int count = std::min(chunk, static_cast<int>(samples.size()) - from);
    Graph g;
    Var x = g.constant(image_batch(blocks, samples, from, count, side));
    Var loss = g.mse_loss(cae.decode(g, cae.encode(g, x)), x);
    total += g.value(loss)[0] * count;
  }
  return total / static_cast<double>(samples.size());
}

std::vector<Array*> raw_params(const NamedParams& named) {
  std::vector<Array*> out;
  out.reserve(named.size());
  for (const auto& [name, p] : named) out.push_back(p);
  return out;
}

}  // namespace

TrainReport cae_train(Cae& cae, const std::vector<Matrix>& coords, const TrainConfig& config) {
  if (coords.empty()) throw ConfigError("cae_train: no data");
  const int side = cae.side();
  for (const auto& block : coords)
    if (block.rows() != side * side)
      throw ConfigError("cae_train: coordinate rows must equal the padded rank");

  const auto [train_ids, val_ids] =
      split_params(static_cast<int>(coords.size()), config.val_fraction, config.seed);

  std::vector<const Matrix*> blocks;
  for (const auto& block : coords) blocks.push_back(&block);
  std::vector<std::pair<int, int>> train_samples, val_samples;
  for (int id : train_ids)
    for (int c = 0; c < coords[id].cols(); ++c) train_samples.push_back({id, c});
  for (int id : val_ids)
    for (int c = 0; c < coords[id].cols(); ++c) val_samples.push_back({id, c});

  Adam adam(raw_params(cae.named_parameters()), config.learning_rate);
  Rng rng(derive_seed(config.seed, "batch-order"));
  TrainReport report;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<int> order = rng.permutation(static_cast<int>(train_samples.size()));
    std::vector<std::pair<int, int>> shuffled(train_samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) shuffled[i] = train_samples[order[i]];

    double epoch_loss = 0.0;
    for (int from = 0; from < static_cast<int>(shuffled.size()); from += config.batch_size) {
      const int count = std::min(config.batch_size, static_cast<int>(shuffled.size()) - from);
      Graph g;
      Var x = g.constant(image_batch(blocks, shuffled, from, count, side));
      Var loss = g.mse_loss(cae.decode(g, cae.encode(g, x)), x);
      g.backward(loss);
      adam.step(g);
      epoch_loss += g.value(loss)[0] * count;
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(shuffled.size()));
    if (!val_samples.empty())
      report.val_loss.push_back(cae_dataset_loss(cae, blocks, val_samples, side));
  }
  return report;
}

namespace {

std::vector<Array> window_steps(const SlidingWindowDataset& ds, const std::vector<int>& ids,
                                int from, int count) {
  const int w = ds.window;
  const int dim = ds.inputs.shape(2);
  std::vector<Array> steps(w, Array({count, dim}));
  for (int k = 0; k < count; ++k) {
    const Eigen::Index base = static_cast<Eigen::Index>(ids[from + k]) * w * dim;
    for (int s = 0; s < w; ++s) {
      const double* src = ds.inputs.data() + base + static_cast<Eigen::Index>(s) * dim;
      double* dst = steps[s].data() + static_cast<Eigen::Index>(k) * dim;
      for (int i = 0; i < dim; ++i) dst[i] = src[i];
    }
  }
  return steps;
}

Array target_rows(const Array& targets, const std::vector<int>& ids, int from, int count) {
  const int q = targets.shape(1);
  Array out({count, q});
  for (int k = 0; k < count; ++k) {
    const double* src = targets.data() + static_cast<Eigen::Index>(ids[from + k]) * q;
    double* dst = out.data() + static_cast<Eigen::Index>(k) * q;
    for (int i = 0; i < q; ++i) dst[i] = src[i];
  }
  return out;
}

double lstm_dataset_loss(Lstm& lstm, const SlidingWindowDataset& ds,
                         const std::vector<int>& ids) {
  if (ids.empty()) return 0.0;
  double total = 0.0;
  const int chunk = 512;
  for (int from = 0; from < static_cast<int>(ids.size()); from += chunk) {
    const int count = std::min(chunk, static_cast<int>(ids.size()) - from);
    Graph g;
    std::vector<Var> steps;
    for (auto& a : window_steps(ds, ids, from, count)) steps.push_back(g.constant(std::move(a)));
    Var loss = g.mse_loss(lstm.forward(g, steps),
                          g.constant(target_rows(ds.targets, ids, from, count)));
    total += g.value(loss)[0] * count;
  }
  return total / static_cast<double>(ids.size());
}

}  // namespace

TrainReport lstm_train(Lstm& lstm, const SlidingWindowDataset& dataset,
                       const TrainConfig& config) {
  if (dataset.sample_count() < 1) throw ConfigError("lstm_train: empty dataset");
  const auto [train_params, val_params] =
      split_params(dataset.param_count, config.val_fraction, config.seed);
  std::vector<int> train_ids, val_ids;
  for (int p : train_params)
    for (int a = 0; a < dataset.per_param; ++a) train_ids.push_back(p * dataset.per_param + a);
  for (int p : val_params)
    for (int a = 0; a < dataset.per_param; ++a) val_ids.push_back(p * dataset.per_param + a);

  Adam adam(raw_params(lstm.named_parameters()), config.learning_rate);
  Rng rng(derive_seed(config.seed, "batch-order"));
  TrainReport report;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<int> order = rng.permutation(static_cast<int>(train_ids.size()));
    std::vector<int> shuffled(train_ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) shuffled[i] = train_ids[order[i]];

    double epoch_loss = 0.0;
    for (int from = 0; from < static_cast<int>(shuffled.size()); from += config.batch_size) {
      const int count = std::min(config.batch_size, static_cast<int>(shuffled.size()) - from);
      Graph g;
      std::vector<Var> steps;
      for (auto& a : window_steps(dataset, shuffled, from, count))
        steps.push_back(g.constant(std::move(a)));
      Var loss = g.mse_loss(lstm.forward(g, steps),
                            g.constant(target_rows(dataset.targets, shuffled, from, count)));
      g.backward(loss);
      adam.step(g);
      epoch_loss += g.value(loss)[0] * count;
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(shuffled.size()));
    if (!val_ids.empty()) report.val_loss.push_back(lstm_dataset_loss(lstm, dataset, val_ids));
  }
  return report;
}

namespace {

Array gather_rows(const Array& data, const std::vector<int>& ids, int from, int count) {
  const int dim = data.shape(1);
  Array out({count, dim});
  for (int k = 0; k < count; ++k) {
    const double* src = data.data() + static_cast<Eigen::Index>(ids[from + k]) * dim;
    double* dst = out.data() + static_cast<Eigen::Index>(k) * dim;
    for (int i = 0; i < dim; ++i) dst[i] = src[i];
  }
  return out;
}

double ffnn_dataset_loss(Ffnn& ffnn, const Array& inputs, const Array& targets,
                         const std::vector<int>& ids) {
  if (ids.empty()) return 0.0;
  Graph g;
  Var loss = g.mse_loss(
      ffnn.forward(g, g.constant(gather_rows(inputs, ids, 0, static_cast<int>(ids.size())))),
      g.constant(gather_rows(targets, ids, 0, static_cast<int>(ids.size()))));
  return g.value(loss)[0];
}

}  // namespace

TrainReport ffnn_train(Ffnn& ffnn, const Array& inputs, const Array& targets, int window,
                       const TrainConfig& config) {
  if (inputs.ndim() != 2 || targets.ndim() != 2 || inputs.shape(0) != targets.shape(0))
    throw ConfigError("ffnn_train: bad dataset shapes");
  if (window < 1 || inputs.shape(0) % window != 0)
    throw ConfigError("ffnn_train: sample count must be m * window");
  const int param_count = inputs.shape(0) / window;

  const auto [train_params, val_params] =
      split_params(param_count, config.val_fraction, config.seed);
  std::vector<int> train_ids, val_ids;
  for (int p : train_params)
    for (int b = 0; b < window; ++b) train_ids.push_back(p * window + b);
  for (int p : val_params)
    for (int b = 0; b < window; ++b) val_ids.push_back(p * window + b);

  Adam adam(raw_params(ffnn.named_parameters()), config.learning_rate);
  Rng rng(derive_seed(config.seed, "batch-order"));
  TrainReport report;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<int> order = rng.permutation(static_cast<int>(train_ids.size()));
    std::vector<int> shuffled(train_ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) shuffled[i] = train_ids[order[i]];

    double epoch_loss = 0.0;
    for (int from = 0; from < static_cast<int>(shuffled.size()); from += config.batch_size) {
      const int count = std::min(config.batch_size, static_cast<int>(shuffled.size()) - from);
      Graph g;
      Var loss = g.mse_loss(ffnn.forward(g, g.constant(gather_rows(inputs, shuffled, from, count))),
                            g.constant(gather_rows(targets, shuffled, from, count)));
      g.backward(loss);
      adam.step(g);
      epoch_loss += g.value(loss)[0] * count;
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(shuffled.size()));
    if (!val_ids.empty())
      report.val_loss.push_back(ffnn_dataset_loss(ffnn, inputs, targets, val_ids));
  }
  return report;
}

Matrix encode_block(Cae& cae, const Matrix& coords) {
  const int side = cae.side();
  if (coords.rows() != side * side) throw ConfigError("encode_block: wrong coordinate rows");
  const int n_t = static_cast<int>(coords.cols());
  Array x({n_t, side, side, 1});
  for (int c = 0; c < n_t; ++c)
    for (int i = 0; i < side * side; ++i)
      x[static_cast<Eigen::Index>(c) * side * side + i] = coords(i, c);
  Graph g;
  const Array& z = g.value(cae.encode(g, g.constant(std::move(x))));
  Matrix out(cae.latent_dim(), n_t);
  for (int c = 0; c < n_t; ++c)
    for (int i = 0; i < cae.latent_dim(); ++i)
      out(i, c) = z[static_cast<Eigen::Index>(c) * cae.latent_dim() + i];
  return out;
}

Matrix decode_block(Cae& cae, const Matrix& latents) {
  if (latents.rows() != cae.latent_dim()) throw ConfigError("decode_block: wrong latent rows");
  const int n_t = static_cast<int>(latents.cols());
  const int q = cae.latent_dim();
  Array z({n_t, q});
  for (int c = 0; c < n_t; ++c)
    for (int i = 0; i < q; ++i) z[static_cast<Eigen::Index>(c) * q + i] = latents(i, c);
  Graph g;
  const Array& x = g.value(cae.decode(g, g.constant(std::move(z))));
  const int rank = cae.input_rank();
  Matrix out(rank, n_t);
  for (int c = 0; c < n_t; ++c)
    for (int i = 0; i < rank; ++i) out(i, c) = x[static_cast<Eigen::Index>(c) * rank + i];
  return out;
}

}  // namespace waverom::nn
