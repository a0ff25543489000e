#include "waverom/nn/models.hpp"

#include <cmath>

#include "waverom/io.hpp"
#include "waverom/rng.hpp"

namespace waverom::nn {

namespace {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::None: return "none";
    case Activation::Elu: return "elu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

Array uniform_fan_in(std::vector<int> shape, int fan_in, std::uint64_t seed) {
  Array a(std::move(shape));
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = rng.uniform(-bound, bound);
  return a;
}

void save_param(const std::filesystem::path& dir, const std::string& name, const Array& a) {
  Matrix column(a.size(), 1);
  for (Eigen::Index i = 0; i < a.size(); ++i) column(i, 0) = a[i];
  io::write_array(dir / (name + ".roms"), column);
}

void load_param(const std::filesystem::path& dir, const std::string& name, Array& a) {
  const Matrix column = io::read_array(dir / (name + ".roms"));
  if (column.size() != a.size())
    throw IoError("checkpoint parameter '" + name + "' has wrong element count in " +
                  dir.string());
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = column(i, 0);
}

void save_params(const std::filesystem::path& dir, const NamedParams& params) {
  for (const auto& [name, p] : params) save_param(dir, name, *p);
}

void load_params(const std::filesystem::path& dir, const NamedParams& params) {
  for (const auto& [name, p] : params) load_param(dir, name, *p);
}

}  // namespace

Var apply_activation(Graph& g, Var x, Activation act) {
  switch (act) {
    case Activation::None: return x;
    case Activation::Elu: return g.elu(x);
    case Activation::LeakyRelu: return g.leaky_relu(x);
    case Activation::Sigmoid: return g.sigmoid(x);
    case Activation::Tanh: return g.tanh(x);
  }
  throw ConfigError("unknown activation");
}

Var DenseLayer::forward(Graph& g, Var x) {
  Var y = g.add(g.matmul(x, g.param(&weight)), g.param(&bias));
  return apply_activation(g, y, activation);
}

Var ConvLayer::forward(Graph& g, Var x) {
  Var y = g.conv2d(x, g.param(&weight), g.param(&bias));
  return apply_activation(g, y, activation);
}

DenseLayer make_dense(int in, int out, Activation act, std::uint64_t seed) {
  DenseLayer layer;
  layer.weight = uniform_fan_in({in, out}, in, derive_seed(seed, "w"));
  layer.bias = uniform_fan_in({out}, in, derive_seed(seed, "b"));
  layer.activation = act;
  return layer;
}

ConvLayer make_conv(int in, int out, Activation act, std::uint64_t seed) {
  ConvLayer layer;
  layer.weight = uniform_fan_in({3, 3, in, out}, 9 * in, derive_seed(seed, "w"));
  layer.bias = uniform_fan_in({out}, 9 * in, derive_seed(seed, "b"));
  layer.activation = act;
  return layer;
}

// ---------------------------------------------------------------------------
// Cae

Cae Cae::build(int latent_dim, int padded_rank, std::uint64_t seed) {
  if (latent_dim < 1) throw ConfigError("cae: latent dim must be >= 1");
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(padded_rank))));
  if (side * side != padded_rank)
    throw ConfigError("cae: padded rank must be a perfect square, got " +
                      std::to_string(padded_rank));
  if (side % 8 != 0 || side <= 0)
    throw ConfigError("cae: image side must be a positive multiple of 8, got " +
                      std::to_string(side));

  Cae cae;
  cae.side_ = side;
  cae.latent_dim_ = latent_dim;
  const int quarter = side / 4, eighth = side / 8;

  cae.enc_conv1_ = make_conv(1, 25, Activation::Elu, derive_seed(seed, "ec1"));
  cae.enc_conv2_ = make_conv(25, 10, Activation::Elu, derive_seed(seed, "ec2"));
  cae.enc_fc1_ = make_dense(10 * quarter * quarter, 20, Activation::Elu, derive_seed(seed, "ef1"));
  cae.enc_fc2_ = make_dense(20, 10, Activation::Elu, derive_seed(seed, "ef2"));
  cae.enc_fc3_ = make_dense(10, latent_dim, Activation::Elu, derive_seed(seed, "ef3"));

  cae.dec_fc1_ = make_dense(latent_dim, 10, Activation::Elu, derive_seed(seed, "df1"));
  cae.dec_fc2_ = make_dense(10, 20, Activation::Elu, derive_seed(seed, "df2"));
  cae.dec_fc3_ = make_dense(20, 3 * eighth * eighth, Activation::Elu, derive_seed(seed, "df3"));
  cae.dec_conv1_ = make_conv(3, 10, Activation::Elu, derive_seed(seed, "dc1"));
  cae.dec_conv2_ = make_conv(10, 25, Activation::Elu, derive_seed(seed, "dc2"));
  cae.dec_conv3_ = make_conv(25, 30, Activation::Elu, derive_seed(seed, "dc3"));
  // linear output so reconstructions can reach the full normalized range
  cae.dec_conv4_ = make_conv(30, 1, Activation::None, derive_seed(seed, "dc4"));
  return cae;
}

Var Cae::encode(Graph& g, Var images) {
  const Array& v = g.value(images);
  if (v.ndim() != 4 || v.shape(1) != side_ || v.shape(2) != side_ || v.shape(3) != 1)
    throw ConfigError("cae encode: expected (B, side, side, 1) input");
  const int batch = v.shape(0);
  Var h = enc_conv1_.forward(g, images);
  h = g.maxpool2(h);
  h = enc_conv2_.forward(g, h);
  h = g.maxpool2(h);
  h = g.reshape(h, {batch, 10 * (side_ / 4) * (side_ / 4)});
  h = enc_fc1_.forward(g, h);
  h = enc_fc2_.forward(g, h);
  return enc_fc3_.forward(g, h);
}

Var Cae::decode(Graph& g, Var latents) {
  const Array& v = g.value(latents);
  if (v.ndim() != 2 || v.shape(1) != latent_dim_)
    throw ConfigError("cae decode: expected (B, q) input");
  const int batch = v.shape(0);
  const int eighth = side_ / 8;
  Var h = dec_fc1_.forward(g, latents);
  h = dec_fc2_.forward(g, h);
  h = dec_fc3_.forward(g, h);
  h = g.reshape(h, {batch, eighth, eighth, 3});
  h = dec_conv1_.forward(g, h);
  h = g.upsample2(h);
  h = dec_conv2_.forward(g, h);
  h = g.upsample2(h);
  h = dec_conv3_.forward(g, h);
  h = g.upsample2(h);
  return dec_conv4_.forward(g, h);
}

NamedParams Cae::named_parameters() {
  return {{"enc_conv1_w", &enc_conv1_.weight}, {"enc_conv1_b", &enc_conv1_.bias},
          {"enc_conv2_w", &enc_conv2_.weight}, {"enc_conv2_b", &enc_conv2_.bias},
          {"enc_fc1_w", &enc_fc1_.weight},     {"enc_fc1_b", &enc_fc1_.bias},
          {"enc_fc2_w", &enc_fc2_.weight},     {"enc_fc2_b", &enc_fc2_.bias},
          {"enc_fc3_w", &enc_fc3_.weight},     {"enc_fc3_b", &enc_fc3_.bias},
          {"dec_fc1_w", &dec_fc1_.weight},     {"dec_fc1_b", &dec_fc1_.bias},
          {"dec_fc2_w", &dec_fc2_.weight},     {"dec_fc2_b", &dec_fc2_.bias},
          {"dec_fc3_w", &dec_fc3_.weight},     {"dec_fc3_b", &dec_fc3_.bias},
          {"dec_conv1_w", &dec_conv1_.weight}, {"dec_conv1_b", &dec_conv1_.bias},
          {"dec_conv2_w", &dec_conv2_.weight}, {"dec_conv2_b", &dec_conv2_.bias},
          {"dec_conv3_w", &dec_conv3_.weight}, {"dec_conv3_b", &dec_conv3_.bias},
          {"dec_conv4_w", &dec_conv4_.weight}, {"dec_conv4_b", &dec_conv4_.bias}};
}

void Cae::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  io::write_kv(dir / "model.kv", {{"kind", "cae"},
                                  {"side", std::to_string(side_)},
                                  {"latent_dim", std::to_string(latent_dim_)}});
  save_params(dir, const_cast<Cae*>(this)->named_parameters());
}

Cae Cae::load(const std::filesystem::path& dir) {
  auto kv = io::read_kv(dir / "model.kv");
  const std::string file = (dir / "model.kv").string();
  const int side = static_cast<int>(io::parse_long(io::require(kv, "side", file), "side"));
  const int q = static_cast<int>(io::parse_long(io::require(kv, "latent_dim", file), "latent_dim"));
  Cae cae = build(q, side * side, 0);
  load_params(dir, cae.named_parameters());
  return cae;
}

// ---------------------------------------------------------------------------
// Lstm

Lstm::Cell Lstm::make_cell(int in, int hidden, std::uint64_t seed) {
  Cell cell;
  cell.w_input = uniform_fan_in({in, 4 * hidden}, in, derive_seed(seed, "wx"));
  cell.w_hidden = uniform_fan_in({hidden, 4 * hidden}, hidden, derive_seed(seed, "wh"));
  cell.bias = uniform_fan_in({4 * hidden}, hidden, derive_seed(seed, "b"));
  return cell;
}

Lstm Lstm::build(int latent_dim, int param_dim, int window, int hidden, std::uint64_t seed) {
  if (window < 1) throw ConfigError("lstm: window must be >= 1");
  if (latent_dim < 1 || param_dim < 0) throw ConfigError("lstm: bad dimensions");
  Lstm lstm;
  lstm.latent_dim_ = latent_dim;
  lstm.input_dim_ = latent_dim + param_dim;
  lstm.window_ = window;
  lstm.hidden_ = hidden;
  lstm.cells_.push_back(make_cell(lstm.input_dim_, hidden, derive_seed(seed, "cell0")));
  lstm.cells_.push_back(make_cell(hidden, hidden, derive_seed(seed, "cell1")));
  lstm.cells_.push_back(make_cell(hidden, hidden, derive_seed(seed, "cell2")));
  lstm.head_ = make_dense(hidden, latent_dim, Activation::None, derive_seed(seed, "head"));
  return lstm;
}

Var Lstm::forward(Graph& g, const std::vector<Var>& steps) {
  if (static_cast<int>(steps.size()) != window_)
    throw ConfigError("lstm forward: expected " + std::to_string(window_) + " steps");
  const int batch = g.value(steps[0]).shape(0);
  for (const Var& s : steps) {
    const Array& v = g.value(s);
    if (v.ndim() != 2 || v.shape(0) != batch || v.shape(1) != input_dim_)
      throw ConfigError("lstm forward: step shape mismatch");
  }

  std::vector<Var> sequence = steps;
  Var last_hidden{-1};
  for (auto& cell : cells_) {
    Var h = g.constant(Array({batch, hidden_}, 0.0));
    Var c = g.constant(Array({batch, hidden_}, 0.0));
    std::vector<Var> outputs;
    outputs.reserve(sequence.size());
    for (const Var& x : sequence) {
      Var z = g.add(g.add(g.matmul(x, g.param(&cell.w_input)),
                          g.matmul(h, g.param(&cell.w_hidden))),
                    g.param(&cell.bias));
      Var gate_i = g.sigmoid(g.slice_cols(z, 0, hidden_));
      Var gate_f = g.sigmoid(g.slice_cols(z, hidden_, hidden_));
      Var gate_g = g.tanh(g.slice_cols(z, 2 * hidden_, hidden_));
      Var gate_o = g.sigmoid(g.slice_cols(z, 3 * hidden_, hidden_));
      c = g.add(g.mul(gate_f, c), g.mul(gate_i, gate_g));
      h = g.mul(gate_o, g.tanh(c));
      outputs.push_back(h);
    }
    last_hidden = outputs.back();
    sequence = std::move(outputs);
  }
  return head_.forward(g, last_hidden);
}

NamedParams Lstm::named_parameters() {
  NamedParams params;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const std::string prefix = "cell" + std::to_string(i) + "_";
    params.emplace_back(prefix + "wx", &cells_[i].w_input);
    params.emplace_back(prefix + "wh", &cells_[i].w_hidden);
    params.emplace_back(prefix + "b", &cells_[i].bias);
  }
  params.emplace_back("head_w", &head_.weight);
  params.emplace_back("head_b", &head_.bias);
  return params;
}

void Lstm::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  io::write_kv(dir / "model.kv",
               {{"kind", "lstm"},
                {"latent_dim", std::to_string(latent_dim_)},
                {"param_dim", std::to_string(input_dim_ - latent_dim_)},
                {"window", std::to_string(window_)},
                {"hidden", std::to_string(hidden_)}});
  save_params(dir, const_cast<Lstm*>(this)->named_parameters());
}

Lstm Lstm::load(const std::filesystem::path& dir) {
  auto kv = io::read_kv(dir / "model.kv");
  const std::string file = (dir / "model.kv").string();
  Lstm lstm = build(
      static_cast<int>(io::parse_long(io::require(kv, "latent_dim", file), "latent_dim")),
      static_cast<int>(io::parse_long(io::require(kv, "param_dim", file), "param_dim")),
      static_cast<int>(io::parse_long(io::require(kv, "window", file), "window")),
      static_cast<int>(io::parse_long(io::require(kv, "hidden", file), "hidden")), 0);
  load_params(dir, lstm.named_parameters());
  return lstm;
}

// ---------------------------------------------------------------------------
// Ffnn

Ffnn Ffnn::build(int param_dim, int latent_dim, int hidden, std::uint64_t seed) {
  if (param_dim < 1 || latent_dim < 1) throw ConfigError("ffnn: bad dimensions");
  Ffnn net;
  // input is [t; theta], hence param_dim + 1 wide
  net.hidden_in_ = make_dense(param_dim + 1, hidden, Activation::LeakyRelu,
                              derive_seed(seed, "fc1"));
  net.out_ = make_dense(hidden, latent_dim, Activation::None, derive_seed(seed, "fc2"));
  return net;
}

Var Ffnn::forward(Graph& g, Var x) {
  const Array& v = g.value(x);
  if (v.ndim() != 2 || v.shape(1) != input_dim())
    throw ConfigError("ffnn forward: expected (B, xi + 1) input");
  return out_.forward(g, hidden_in_.forward(g, x));
}

NamedParams Ffnn::named_parameters() {
  return {{"fc1_w", &hidden_in_.weight},
          {"fc1_b", &hidden_in_.bias},
          {"fc2_w", &out_.weight},
          {"fc2_b", &out_.bias}};
}

void Ffnn::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  io::write_kv(dir / "model.kv",
               {{"kind", "ffnn"},
                {"param_dim", std::to_string(input_dim() - 1)},
                {"latent_dim", std::to_string(latent_dim())},
                {"hidden", std::to_string(hidden_in_.weight.shape(1))}});
  save_params(dir, const_cast<Ffnn*>(this)->named_parameters());
}

Ffnn Ffnn::load(const std::filesystem::path& dir) {
  auto kv = io::read_kv(dir / "model.kv");
  const std::string file = (dir / "model.kv").string();
  Ffnn net = build(
      static_cast<int>(io::parse_long(io::require(kv, "param_dim", file), "param_dim")),
      static_cast<int>(io::parse_long(io::require(kv, "latent_dim", file), "latent_dim")),
      static_cast<int>(io::parse_long(io::require(kv, "hidden", file), "hidden")), 0);
  load_params(dir, net.named_parameters());
  return net;
}

}  // namespace waverom::nn
