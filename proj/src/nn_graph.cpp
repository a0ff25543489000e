#include "waverom/nn/graph.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace waverom::nn {

Var Graph::make(Array value, bool needs_grad, const char* kind, std::vector<int> parents,
                std::function<void(Graph&, int)> backprop) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.kind = kind;
  n.parents = std::move(parents);
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

bool Graph::any_needs_grad(const std::vector<int>& parents) const {
  for (int p : parents)
    if (nodes_[p].needs_grad) return true;
  return false;
}

Var Graph::constant(Array value) { return make(std::move(value), false, "constant", {}, {}); }

Var Graph::param(Array* storage) {
  auto it = params_.find(storage);
  if (it != params_.end()) return {it->second};
  Var v = make(*storage, true, "param", {}, {});
  params_.emplace(storage, v.id);
  return v;
}

const Array& Graph::grad_of(const Array* storage) const {
  auto it = params_.find(storage);
  if (it == params_.end()) throw ConfigError("graph: parameter not registered");
  return nodes_[it->second].grad;
}

bool Graph::has_param(const Array* storage) const { return params_.count(storage) > 0; }

Var Graph::matmul(Var a, Var b) {
  const Array& av = value(a);
  const Array& bv = value(b);
  if (av.ndim() != 2 || bv.ndim() != 2 || av.shape(1) != bv.shape(0))
    throw ConfigError("matmul: incompatible shapes");
  Array out({av.shape(0), bv.shape(1)});
  out.matrix().noalias() = av.matrix() * bv.matrix();
  return make(std::move(out), any_needs_grad({a.id, b.id}), "matmul", {a.id, b.id},
              [a, b](Graph& g, int self) {
                const Array& gout = g.nodes_[self].grad;
                Node& na = g.node(a);
                Node& nb = g.node(b);
                if (na.needs_grad)
                  na.grad.matrix().noalias() += gout.matrix() * nb.value.matrix().transpose();
                if (nb.needs_grad)
                  nb.grad.matrix().noalias() += na.value.matrix().transpose() * gout.matrix();
              });
}

Var Graph::add(Var a, Var b) {
  const Array& av = value(a);
  const Array& bv = value(b);
  if (av.same_shape(bv)) {
    Array out = av;
    out.flat() += bv.flat();
    return make(std::move(out), any_needs_grad({a.id, b.id}), "add", {a.id, b.id},
                [a, b](Graph& g, int self) {
                  const Array& gout = g.nodes_[self].grad;
                  if (g.node(a).needs_grad) g.node(a).grad.flat() += gout.flat();
                  if (g.node(b).needs_grad) g.node(b).grad.flat() += gout.flat();
                });
  }
  const int trailing = av.shape(av.ndim() - 1);
  if (bv.ndim() != 1 || bv.shape(0) != trailing)
    throw ConfigError("add: shapes must match or b must be a trailing-axis bias");
  Array out = av;
  const int rows = static_cast<int>(out.size() / trailing);
  out.matrix_rows(rows).rowwise() += bv.flat().transpose();
  return make(std::move(out), any_needs_grad({a.id, b.id}), "add_bias", {a.id, b.id},
              [a, b, rows](Graph& g, int self) {
                const Array& gout = g.nodes_[self].grad;
                if (g.node(a).needs_grad) g.node(a).grad.flat() += gout.flat();
                if (g.node(b).needs_grad)
                  g.node(b).grad.flat() +=
                      gout.matrix_rows(rows).colwise().sum().transpose();
              });
}

Var Graph::sub(Var a, Var b) {
  const Array& av = value(a);
  const Array& bv = value(b);
  if (!av.same_shape(bv)) throw ConfigError("sub: shape mismatch");
  Array out = av;
  out.flat() -= bv.flat();
  return make(std::move(out), any_needs_grad({a.id, b.id}), "sub", {a.id, b.id},
              [a, b](Graph& g, int self) {
                const Array& gout = g.nodes_[self].grad;
                if (g.node(a).needs_grad) g.node(a).grad.flat() += gout.flat();
                if (g.node(b).needs_grad) g.node(b).grad.flat() -= gout.flat();
              });
}

Var Graph::mul(Var a, Var b) {
  const Array& av = value(a);
  const Array& bv = value(b);
  if (!av.same_shape(bv)) throw ConfigError("mul: shape mismatch");
  Array out = av;
  out.flat().array() *= bv.flat().array();
  return make(std::move(out), any_needs_grad({a.id, b.id}), "mul", {a.id, b.id},
              [a, b](Graph& g, int self) {
                const Array& gout = g.nodes_[self].grad;
                if (g.node(a).needs_grad)
                  g.node(a).grad.flat().array() +=
                      gout.flat().array() * g.node(b).value.flat().array();
                if (g.node(b).needs_grad)
                  g.node(b).grad.flat().array() +=
                      gout.flat().array() * g.node(a).value.flat().array();
              });
}

Var Graph::scale(Var a, double factor) {
  Array out = value(a);
  out.flat() *= factor;
  return make(std::move(out), nodes_[a.id].needs_grad, "scale", {a.id},
              [a, factor](Graph& g, int self) {
                if (g.node(a).needs_grad)
                  g.node(a).grad.flat() += factor * g.nodes_[self].grad.flat();
              });
}

Var Graph::elu(Var a) {
  Array out = value(a);
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] = std::expm1(out[i]);
  return make(std::move(out), nodes_[a.id].needs_grad, "elu", {a.id},
              [a](Graph& g, int self) {
                if (!g.node(a).needs_grad) return;
                const Array& gout = g.nodes_[self].grad;
                const Array& y = g.nodes_[self].value;
                Array& ga = g.node(a).grad;
                for (Eigen::Index i = 0; i < y.size(); ++i)
                  ga[i] += gout[i] * (y[i] >= 0.0 ? 1.0 : y[i] + 1.0);
              });
}

Var Graph::leaky_relu(Var a, double slope) {
  Array out = value(a);
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] *= slope;
  return make(std::move(out), nodes_[a.id].needs_grad, "leaky_relu", {a.id},
              [a, slope](Graph& g, int self) {
                if (!g.node(a).needs_grad) return;
                const Array& gout = g.nodes_[self].grad;
                const Array& x = g.node(a).value;
                Array& ga = g.node(a).grad;
                for (Eigen::Index i = 0; i < x.size(); ++i)
                  ga[i] += gout[i] * (x[i] >= 0.0 ? 1.0 : slope);
              });
}

Var Graph::sigmoid(Var a) {
  Array out = value(a);
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  return make(std::move(out), nodes_[a.id].needs_grad, "sigmoid", {a.id},
              [a](Graph& g, int self) {
                if (!g.node(a).needs_grad) return;
                const Array& gout = g.nodes_[self].grad;
                const Array& y = g.nodes_[self].value;
                Array& ga = g.node(a).grad;
                for (Eigen::Index i = 0; i < y.size(); ++i)
                  ga[i] += gout[i] * y[i] * (1.0 - y[i]);
              });
}

Var Graph::tanh(Var a) {
  Array out = value(a);
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return make(std::move(out), nodes_[a.id].needs_grad, "tanh", {a.id},
              [a](Graph& g, int self) {
                if (!g.node(a).needs_grad) return;
                const Array& gout = g.nodes_[self].grad;
                const Array& y = g.nodes_[self].value;
                Array& ga = g.node(a).grad;
                for (Eigen::Index i = 0; i < y.size(); ++i)
                  ga[i] += gout[i] * (1.0 - y[i] * y[i]);
              });
}

namespace {

// Gather 3x3 same-padded patches: cols((b*H+y)*W+x, (ky*3+kx)*Cin+ci).
std::shared_ptr<RowMat> im2col(const Array& x) {
  const int batch = x.shape(0), h = x.shape(1), w = x.shape(2), cin = x.shape(3);
  auto cols = std::make_shared<RowMat>(RowMat::Zero(static_cast<Eigen::Index>(batch) * h * w,
                                                    9 * cin));
  const double* src = x.data();
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(b) * h + y) * w + xx;
        double* dst = cols->data() + row * 9 * cin;
        for (int ky = 0; ky < 3; ++ky) {
          const int yy = y + ky - 1;
          if (yy < 0 || yy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int xs = xx + kx - 1;
            if (xs < 0 || xs >= w) continue;
            const double* px = src + ((static_cast<Eigen::Index>(b) * h + yy) * w + xs) * cin;
            double* out = dst + (ky * 3 + kx) * cin;
            for (int c = 0; c < cin; ++c) out[c] = px[c];
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const RowMat& cols_grad, Array& x_grad) {
  const int batch = x_grad.shape(0), h = x_grad.shape(1), w = x_grad.shape(2),
            cin = x_grad.shape(3);
  double* dst = x_grad.data();
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(b) * h + y) * w + xx;
        const double* src = cols_grad.data() + row * 9 * cin;
        for (int ky = 0; ky < 3; ++ky) {
          const int yy = y + ky - 1;
          if (yy < 0 || yy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int xs = xx + kx - 1;
            if (xs < 0 || xs >= w) continue;
            double* px = dst + ((static_cast<Eigen::Index>(b) * h + yy) * w + xs) * cin;
            const double* g = src + (ky * 3 + kx) * cin;
            for (int c = 0; c < cin; ++c) px[c] += g[c];
          }
        }
      }
    }
  }
}

}  // namespace

Var Graph::conv2d(Var x, Var w, Var bias) {
  const Array& xv = value(x);
  const Array& wv = value(w);
  const Array& bv = value(bias);
  if (xv.ndim() != 4) throw ConfigError("conv2d: input must be NHWC");
  if (wv.ndim() != 4 || wv.shape(0) != 3 || wv.shape(1) != 3 || wv.shape(2) != xv.shape(3))
    throw ConfigError("conv2d: weights must be (3,3,Cin,Cout)");
  const int cout = wv.shape(3);
  if (bv.ndim() != 1 || bv.shape(0) != cout) throw ConfigError("conv2d: bad bias shape");

  auto cols = im2col(xv);
  Array out({xv.shape(0), xv.shape(1), xv.shape(2), cout});
  const int cin = xv.shape(3);
  auto wmat = wv.matrix_rows(9 * cin);  // (9 Cin, Cout)
  out.matrix_rows(static_cast<int>(cols->rows())).noalias() = *cols * wmat;
  out.matrix_rows(static_cast<int>(cols->rows())).rowwise() += bv.flat().transpose();

  return make(std::move(out), any_needs_grad({x.id, w.id, bias.id}), "conv2d",
              {x.id, w.id, bias.id}, [x, w, bias, cols, cin](Graph& g, int self) {
                const Array& gout = g.nodes_[self].grad;
                const int rows = static_cast<int>(cols->rows());
                auto gmat = gout.matrix_rows(rows);  // (BHW, Cout)
                if (g.node(w).needs_grad)
                  g.node(w).grad.matrix_rows(9 * cin).noalias() += cols->transpose() * gmat;
                if (g.node(bias).needs_grad)
                  g.node(bias).grad.flat() += gmat.colwise().sum().transpose();
                if (g.node(x).needs_grad) {
                  RowMat cols_grad(rows, 9 * cin);
                  cols_grad.noalias() =
                      gmat * g.node(w).value.matrix_rows(9 * cin).transpose();
                  col2im_add(cols_grad, g.node(x).grad);
                }
              });
}

Var Graph::maxpool2(Var x) {
  const Array& xv = value(x);
  if (xv.ndim() != 4 || xv.shape(1) % 2 != 0 || xv.shape(2) % 2 != 0)
    throw ConfigError("maxpool2: input must be NHWC with even spatial size");
  const int batch = xv.shape(0), h = xv.shape(1), w = xv.shape(2), c = xv.shape(3);
  Array out({batch, h / 2, w / 2, c});
  auto argmax = std::make_shared<std::vector<Eigen::Index>>(out.size());
  const double* src = xv.data();
  double* dst = out.data();
  Eigen::Index o = 0;
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < h; y += 2) {
      for (int xx = 0; xx < w; xx += 2) {
        for (int ci = 0; ci < c; ++ci) {
          double best = -std::numeric_limits<double>::infinity();
          Eigen::Index best_at = 0;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dxx = 0; dxx < 2; ++dxx) {
              const Eigen::Index at =
                  ((static_cast<Eigen::Index>(b) * h + y + dy) * w + xx + dxx) * c + ci;
              if (src[at] > best) {
                best = src[at];
                best_at = at;
              }
            }
          }
          dst[o] = best;
          (*argmax)[o] = best_at;
          ++o;
        }
      }
    }
  }
  return make(std::move(out), nodes_[x.id].needs_grad, "maxpool2", {x.id},
              [x, argmax](Graph& g, int self) {
                if (!g.node(x).needs_grad) return;
                const Array& gout = g.nodes_[self].grad;
                Array& gx = g.node(x).grad;
                for (Eigen::Index i = 0; i < gout.size(); ++i)
                  gx[(*argmax)[i]] += gout[i];
              });
}

Var Graph::upsample2(Var x) {
  const Array& xv = value(x);
  if (xv.ndim() != 4) throw ConfigError("upsample2: input must be NHWC");
  const int batch = xv.shape(0), h = xv.shape(1), w = xv.shape(2), c = xv.shape(3);
  Array out({batch, 2 * h, 2 * w, c});
  const double* src = xv.data();
  double* dst = out.data();
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < 2 * h; ++y) {
      for (int xx = 0; xx < 2 * w; ++xx) {
        const double* px =
            src + ((static_cast<Eigen::Index>(b) * h + y / 2) * w + xx / 2) * c;
        double* q = dst + ((static_cast<Eigen::Index>(b) * 2 * h + y) * 2 * w + xx) * c;
        for (int ci = 0; ci < c; ++ci) q[ci] = px[ci];
      }
    }
  }
  return make(std::move(out), nodes_[x.id].needs_grad, "upsample2", {x.id},
              [x, batch, h, w, c](Graph& g, int self) {
                if (!g.node(x).needs_grad) return;
                const Array& gout = g.nodes_[self].grad;
                Array& gx = g.node(x).grad;
                const double* src = gout.data();
                for (int b = 0; b < batch; ++b)
                  for (int y = 0; y < 2 * h; ++y)
                    for (int xx = 0; xx < 2 * w; ++xx) {
                      const double* q =
                          src + ((static_cast<Eigen::Index>(b) * 2 * h + y) * 2 * w + xx) * c;
                      double* px = gx.data() +
                                   ((static_cast<Eigen::Index>(b) * h + y / 2) * w + xx / 2) * c;
                      for (int ci = 0; ci < c; ++ci) px[ci] += q[ci];
                    }
              });
}

Var Graph::reshape(Var a, std::vector<int> shape) {
  Array out = value(a).reshaped(std::move(shape));
  return make(std::move(out), nodes_[a.id].needs_grad, "reshape", {a.id},
              [a](Graph& g, int self) {
                if (g.node(a).needs_grad)
                  g.node(a).grad.flat() += g.nodes_[self].grad.flat();
              });
}

Var Graph::slice_cols(Var a, int start, int count) {
  const Array& av = value(a);
  if (av.ndim() != 2 || start < 0 || count < 1 || start + count > av.shape(1))
    throw ConfigError("slice_cols: bad slice");
  Array out({av.shape(0), count});
  out.matrix() = av.matrix().middleCols(start, count);
  return make(std::move(out), nodes_[a.id].needs_grad, "slice_cols", {a.id},
              [a, start, count](Graph& g, int self) {
                if (!g.node(a).needs_grad) return;
                g.node(a).grad.matrix().middleCols(start, count) +=
                    g.nodes_[self].grad.matrix();
              });
}

Var Graph::mse_loss(Var prediction, Var target) {
  const Array& pv = value(prediction);
  const Array& tv = value(target);
  if (!pv.same_shape(tv)) throw ConfigError("mse_loss: shape mismatch");
  const double samples = pv.shape(0);
  Array out({1});
  out[0] = (pv.flat() - tv.flat()).squaredNorm() / samples;
  return make(std::move(out), any_needs_grad({prediction.id, target.id}), "mse_loss",
              {prediction.id, target.id}, [prediction, target, samples](Graph& g, int self) {
                const double gs = g.nodes_[self].grad[0] * 2.0 / samples;
                const auto diff = g.node(prediction).value.flat() - g.node(target).value.flat();
                if (g.node(prediction).needs_grad)
                  g.node(prediction).grad.flat() += gs * diff;
                if (g.node(target).needs_grad) g.node(target).grad.flat() -= gs * diff;
              });
}

void Graph::backward(Var loss) {
  if (value(loss).size() != 1) throw ConfigError("backward: loss must be scalar");
  if (!std::isfinite(value(loss)[0]))
    throw NumericError("backward: non-finite loss value");

  // Reachable set + topological order (iterative DFS over parents).
  std::vector<int> topo;
  std::vector<char> state(nodes_.size(), 0);  // 0 new, 1 open, 2 done
  std::vector<int> stack = {loss.id};
  while (!stack.empty()) {
    const int id = stack.back();
    if (state[id] == 0) {
      state[id] = 1;
      for (int p : nodes_[id].parents)
        if (state[p] == 0) stack.push_back(p);
    } else {
      stack.pop_back();
      if (state[id] == 1) {
        state[id] = 2;
        topo.push_back(id);
      }
    }
  }

  for (int id : topo) {
    if (nodes_[id].needs_grad && nodes_[id].grad.size() != nodes_[id].value.size()) {
      nodes_[id].grad = Array(nodes_[id].value.shape(), 0.0);
    } else if (nodes_[id].needs_grad) {
      nodes_[id].grad.fill(0.0);
    }
  }
  nodes_[loss.id].grad = Array(value(loss).shape(), 1.0);

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node& n = nodes_[*it];
    if (n.needs_grad && n.backprop) n.backprop(*this, *it);
  }

  for (const auto& [storage, id] : params_) {
    if (state[id] == 2 && !nodes_[id].grad.all_finite())
      throw NumericError(std::string("non-finite gradient in node '") + nodes_[id].kind + "'");
  }
}

}  // namespace waverom::nn
