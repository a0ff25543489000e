#ifndef WAVEROM_NN_TRAINING_HPP
#define WAVEROM_NN_TRAINING_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "waverom/nn/models.hpp"
#include "waverom/params.hpp"

namespace waverom::nn {

/// Adaptive moment estimation with bias correction.
class Adam {
 public:
  Adam(std::vector<Array*> params, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double epsilon = 1e-8);

  /// Apply one update from explicit gradients (index-aligned with params).
  void step_with(const std::vector<const Array*>& grads);
  /// Apply one update from the gradients recorded in a graph.
  void step(const Graph& graph);

  long steps_taken() const { return steps_; }

 private:
  std::vector<Array*> params_;
  std::vector<Array> first_moment_, second_moment_;
  double learning_rate_, beta1_, beta2_, epsilon_;
  long steps_ = 0;
};

/// Per-feature min-max normalization to [-1, 1], fitted on training data
/// only. Features are matrix rows; columns are samples. Degenerate features
/// (max == min) map to 0 and invert to the stored constant.
class MinMaxScaler {
 public:
  void fit(const Matrix& data);
  void fit(const std::vector<Matrix>& blocks);

  Matrix transform(const Matrix& data) const;
  Matrix inverse(const Matrix& data) const;
  Vector transform(const Vector& v) const;
  Vector inverse(const Vector& v) const;

  int features() const { return static_cast<int>(center_.size()); }
  bool fitted() const { return center_.size() > 0; }

  void save(const std::filesystem::path& path) const;
  static MinMaxScaler load(const std::filesystem::path& path);

 private:
  Vector center_, half_width_;
};

/// LSTM training windows. Sample alpha of parameter j stacks latent steps
/// t_alpha .. t_{alpha+w-1} (each concatenated with theta_j) and targets the
/// latent at t_{alpha+w}. Samples are parameter-major: g = N_t - w per
/// parameter.
struct SlidingWindowDataset {
  Array inputs;   // (samples, w, q + xi)
  Array targets;  // (samples, q)
  int window = 0;
  int per_param = 0;    // g
  int param_count = 0;  // m

  int sample_count() const { return per_param * param_count; }
};

/// latents: one (q x N_t) block per parameter; thetas: matching normalized
/// parameter vectors. Throws ConfigError when N_t <= window.
SlidingWindowDataset build_sliding_windows(const std::vector<Matrix>& latents,
                                           const std::vector<Vector>& thetas, int window);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 20;
  int epochs = 200;
  double val_fraction = 0.1;  // by-parameter holdout
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch (empty when no holdout)

  double final_train_loss() const { return train_loss.empty() ? 0.0 : train_loss.back(); }
  double final_val_loss() const { return val_loss.empty() ? 0.0 : val_loss.back(); }
};

/// Autoencoder training on projected snapshot coordinates (normalized,
/// one (n x N_t) block per parameter; columns become (side, side, 1)
/// images). The 90/10 train/validation split is by parameter.
TrainReport cae_train(Cae& cae, const std::vector<Matrix>& coords, const TrainConfig& config);

/// One-step-ahead latent prediction over sliding windows; split by parameter.
TrainReport lstm_train(Lstm& lstm, const SlidingWindowDataset& dataset,
                       const TrainConfig& config);

/// First-window latent regression: inputs (m*w, xi+1) rows [t; theta],
/// targets (m*w, q); split by parameter blocks of w rows.
TrainReport ffnn_train(Ffnn& ffnn, const Array& inputs, const Array& targets, int window,
                       const TrainConfig& config);

/// Encode a coordinate block (n x N_t, normalized) into latents (q x N_t).
Matrix encode_block(Cae& cae, const Matrix& coords);
/// Decode latents (q x N_t) back to coordinates (n x N_t, normalized).
Matrix decode_block(Cae& cae, const Matrix& latents);

}  // namespace waverom::nn

#endif
