#ifndef WAVEROM_NN_MODELS_HPP
#define WAVEROM_NN_MODELS_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "waverom/nn/graph.hpp"

namespace waverom::nn {

enum class Activation { None, Elu, LeakyRelu, Sigmoid, Tanh };

Var apply_activation(Graph& g, Var x, Activation act);

struct DenseLayer {
  Array weight;  // (in, out)
  Array bias;    // (out)
  Activation activation = Activation::None;

  Var forward(Graph& g, Var x);
};

struct ConvLayer {
  Array weight;  // (3, 3, in, out)
  Array bias;    // (out)
  Activation activation = Activation::None;

  Var forward(Graph& g, Var x);
};

/// Uniform fan-in initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// deterministic per seed.
DenseLayer make_dense(int in, int out, Activation act, std::uint64_t seed);
ConvLayer make_conv(int in, int out, Activation act, std::uint64_t seed);

using NamedParams = std::vector<std::pair<std::string, Array*>>;

/// Convolutional autoencoder. The encoder maps a (side, side, 1) image to a
/// latent vector through conv(25)/pool/conv(10)/pool and dense 20 -> 10 -> q;
/// the decoder mirrors it through dense 10 -> 20 -> 3 (side/8)^2, a reshape
/// to (side/8, side/8, 3) and conv 10 / 25 / 30 stages interleaved with
/// upsampling, ending in a linear 1-channel conv. ELU activations, 3x3
/// kernels; side must be a positive multiple of 8.
class Cae {
 public:
  static Cae build(int latent_dim, int padded_rank, std::uint64_t seed);

  Var encode(Graph& g, Var images);   // (B, side, side, 1) -> (B, q)
  Var decode(Graph& g, Var latents);  // (B, q) -> (B, side, side, 1)

  int side() const { return side_; }
  int latent_dim() const { return latent_dim_; }
  int input_rank() const { return side_ * side_; }
  NamedParams named_parameters();

  void save(const std::filesystem::path& dir) const;
  static Cae load(const std::filesystem::path& dir);

 private:
  int side_ = 0;
  int latent_dim_ = 0;
  ConvLayer enc_conv1_, enc_conv2_;
  DenseLayer enc_fc1_, enc_fc2_, enc_fc3_;
  DenseLayer dec_fc1_, dec_fc2_, dec_fc3_;
  ConvLayer dec_conv1_, dec_conv2_, dec_conv3_, dec_conv4_;
};

/// Stacked LSTM (three layers, hidden width 50) with a linear head mapping
/// the last hidden state to the next latent vector. Inputs are windows of
/// w step vectors of size input_dim = q + xi.
class Lstm {
 public:
  static Lstm build(int latent_dim, int param_dim, int window, int hidden = 50,
                    std::uint64_t seed = 0);

  /// steps: window-many (B, input_dim) arrays in time order -> (B, q).
  Var forward(Graph& g, const std::vector<Var>& steps);

  int window() const { return window_; }
  int input_dim() const { return input_dim_; }
  int latent_dim() const { return latent_dim_; }
  int hidden() const { return hidden_; }
  NamedParams named_parameters();

  void save(const std::filesystem::path& dir) const;
  static Lstm load(const std::filesystem::path& dir);

 private:
  struct Cell {
    Array w_input;   // (in, 4H), gate order [i, f, g, o]
    Array w_hidden;  // (H, 4H)
    Array bias;      // (4H)
  };
  static Cell make_cell(int in, int hidden, std::uint64_t seed);

  int latent_dim_ = 0, input_dim_ = 0, window_ = 0, hidden_ = 0;
  std::vector<Cell> cells_;
  DenseLayer head_;
};

/// Two-layer regression network: input (xi + 1) -> dense 50 (Leaky ReLU)
/// -> dense q (linear).
class Ffnn {
 public:
  static Ffnn build(int param_dim, int latent_dim, int hidden = 50, std::uint64_t seed = 0);

  Var forward(Graph& g, Var x);  // (B, xi + 1) -> (B, q)

  int input_dim() const { return hidden_in_.weight.shape(0); }
  int latent_dim() const { return out_.weight.shape(1); }
  NamedParams named_parameters();

  void save(const std::filesystem::path& dir) const;
  static Ffnn load(const std::filesystem::path& dir);

 private:
  DenseLayer hidden_in_, out_;
};

}  // namespace waverom::nn

#endif
