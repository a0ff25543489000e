#ifndef WAVEROM_NN_GRAPH_HPP
#define WAVEROM_NN_GRAPH_HPP

#include <functional>
#include <unordered_map>
#include <vector>

#include "waverom/nn/array.hpp"

namespace waverom::nn {

struct Var {
  int id = -1;
};

/// Reverse-mode autodiff over array-valued operations. One graph is built
/// per forward pass; backward() runs the recorded adjoints in reverse
/// topological order and accumulates gradients for every parameter leaf.
class Graph {
 public:
  /// Leaf with no gradient.
  Var constant(Array value);
  /// Trainable leaf bound to external storage. Registering the same pointer
  /// twice returns the same node, so weights shared across time steps
  /// accumulate into one gradient.
  Var param(Array* storage);

  Var matmul(Var a, Var b);
  /// Elementwise add for equal shapes, or bias broadcast when b is 1D with
  /// length equal to a's trailing axis.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);

  Var elu(Var a);
  Var leaky_relu(Var a, double slope = 0.01);
  Var sigmoid(Var a);
  Var tanh(Var a);

  /// 3x3 stride-1 same-padding convolution on NHWC batches.
  /// x: (B,H,W,Cin), w: (3,3,Cin,Cout), bias: (Cout).
  Var conv2d(Var x, Var w, Var bias);
  /// 2x2 max pooling, stride 2.
  Var maxpool2(Var x);
  /// 2x2 nearest-neighbor upsampling.
  Var upsample2(Var x);

  Var reshape(Var a, std::vector<int> shape);
  /// Columns [start, start+count) of a 2D value.
  Var slice_cols(Var a, int start, int count);

  /// Mean over samples (leading axis) of the squared L2 norm of the
  /// per-sample difference; scalar output.
  Var mse_loss(Var prediction, Var target);

  /// Run the adjoint sweep from a scalar loss. Throws NumericError naming
  /// the node kind if a non-finite gradient appears.
  void backward(Var loss);

  const Array& value(Var v) const { return nodes_[v.id].value; }
  const Array& grad(Var v) const { return nodes_[v.id].grad; }
  /// Gradient of a registered parameter after backward().
  const Array& grad_of(const Array* storage) const;
  bool has_param(const Array* storage) const;

 private:
  struct Node {
    Array value;
    Array grad;
    bool needs_grad = false;
    const char* kind = "";
    std::vector<int> parents;
    std::function<void(Graph&, int)> backprop;
  };

  Var make(Array value, bool needs_grad, const char* kind, std::vector<int> parents,
           std::function<void(Graph&, int)> backprop);
  bool any_needs_grad(const std::vector<int>& parents) const;
  Node& node(Var v) { return nodes_[v.id]; }

  std::vector<Node> nodes_;
  std::unordered_map<const Array*, int> params_;

  friend struct GraphTestAccess;
};

}  // namespace waverom::nn

#endif
