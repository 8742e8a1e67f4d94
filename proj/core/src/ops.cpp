/*
 * Copyright 2026 The Empathy-LSTM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "empathy/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "empathy/errors.hpp"

namespace empathy::ops {

namespace {

using detail::Node;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;
using Backward = std::function<void(Node&)>;

bool wants_grad(const Node& n) { return n.requires_grad; }

Tensor record(Shape shape, Buffer value,
              std::initializer_list<const Tensor*> inputs, Backward fn) {
  Tensor out = Tensor::adopt(std::move(shape), std::move(value));
  auto* tape = Tape::current();
  if (!tape) return out;
  bool any = false;
  for (const auto* t : inputs) any = any || t->requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.leaf = false;
  for (const auto* t : inputs) node.inputs.push_back(t->node());
  node.backward = std::move(fn);
  tape->record(out.node());
  return out;
}

Tensor record_many(Shape shape, Buffer value,
                   std::span<const Tensor> inputs, Backward fn) {
  Tensor out = Tensor::adopt(std::move(shape), std::move(value));
  auto* tape = Tape::current();
  if (!tape) return out;
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.leaf = false;
  for (const auto& t : inputs) node.inputs.push_back(t.node());
  node.backward = std::move(fn);
  tape->record(out.node());
  return out;
}

void require_rank2(const Tensor& t, const char* op, const char* name) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": " + name +
                         " must be a matrix, got " + to_string(t.shape()));
  }
}

ConstMap view(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMap(t.values().data(), static_cast<Eigen::Index>(rows),
                  static_cast<Eigen::Index>(cols));
}

template <typename F, typename D>
Tensor unary(const Tensor& x, F f, D derivative_from_in_out) {
  Buffer out(x.size());
  auto in = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return record(x.shape(), std::move(out), {&x},
                [derivative_from_in_out](Node& self) {
                  auto& input = *self.inputs[0];
                  auto& g = input.sink();
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += self.grad[i] *
                            derivative_from_in_out(input.value[i], self.value[i]);
                  }
                });
}

enum class Binary { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, Binary kind, const char* name) {
  const bool same = a.shape() == b.shape();
  const bool a_scalar = a.size() == 1 && !same;
  const bool b_scalar = b.size() == 1 && !same;
  if (!same && !a_scalar && !b_scalar) {
    throw DimensionError(std::string(name) + ": incompatible shapes " +
                         to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  const Shape shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = element_count(shape);
  auto av = a.values();
  auto bv = b.values();
  Buffer out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[a_scalar ? 0 : i];
    const double y = bv[b_scalar ? 0 : i];
    switch (kind) {
      case Binary::add: out[i] = x + y; break;
      case Binary::sub: out[i] = x - y; break;
      case Binary::mul: out[i] = x * y; break;
    }
  }
  return record(shape, std::move(out), {&a, &b},
                [kind, a_scalar, b_scalar](Node& self) {
                  auto& na = *self.inputs[0];
                  auto& nb = *self.inputs[1];
                  const std::size_t n = self.grad.size();
                  if (wants_grad(na)) {
                    auto& g = na.sink();
                    for (std::size_t i = 0; i < n; ++i) {
                      double d = self.grad[i];
                      if (kind == Binary::mul) d *= nb.value[b_scalar ? 0 : i];
                      g[a_scalar ? 0 : i] += d;
                    }
                  }
                  if (wants_grad(nb)) {
                    auto& g = nb.sink();
                    for (std::size_t i = 0; i < n; ++i) {
                      double d = self.grad[i];
                      if (kind == Binary::sub) d = -d;
                      if (kind == Binary::mul) d *= na.value[a_scalar ? 0 : i];
                      g[b_scalar ? 0 : i] += d;
                    }
                  }
                });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul", "lhs");
  require_rank2(b, "matmul", "rhs");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions differ for " +
                         to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  Buffer out(m * n);
  Map(out.data(), m, n).noalias() = view(a, m, k) * view(b, k, n);
  return record({m, n}, std::move(out), {&a, &b}, [m, k, n](Node& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    ConstMap dc(self.grad.data(), m, n);
    if (wants_grad(na)) {
      Map(na.sink().data(), m, k).noalias() +=
          dc * ConstMap(nb.value.data(), k, n).transpose();
    }
    if (wants_grad(nb)) detail::accumulate_outer(nb, na.value, self.grad, m);
  });
}

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank2(weight, "affine", "weight");
  const bool row_input = x.rank() == 1;
  if (!row_input) require_rank2(x, "affine", "input");
  const std::size_t m = x.rows(), k = x.cols();
  const std::size_t n = weight.shape()[1];
  if (weight.shape()[0] != k) {
    throw DimensionError("affine: input " + to_string(x.shape()) +
                         " does not match weight " + to_string(weight.shape()));
  }
  if (bias.size() != n) {
    throw DimensionError("affine: bias " + to_string(bias.shape()) +
                         " does not match weight " + to_string(weight.shape()));
  }
  Buffer out(m * n);
  Map y(out.data(), m, n);
  y.noalias() = view(x, m, k) * view(weight, k, n);
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.values().data(), n);
  Shape shape = row_input ? Shape{n} : Shape{m, n};
  return record(std::move(shape), std::move(out), {&x, &weight, &bias},
                [m, k, n](Node& self) {
                  auto& nx = *self.inputs[0];
                  auto& nw = *self.inputs[1];
                  auto& nb = *self.inputs[2];
                  ConstMap dy(self.grad.data(), m, n);
                  if (wants_grad(nx)) {
                    Map(nx.sink().data(), m, k).noalias() +=
                        dy * ConstMap(nw.value.data(), k, n).transpose();
                  }
                  if (wants_grad(nw)) {
                    detail::accumulate_outer(nw, nx.value, self.grad, m);
                  }
                  if (wants_grad(nb)) {
                    Eigen::Map<Eigen::RowVectorXd>(nb.sink().data(), n) +=
                        dy.colwise().sum();
                  }
                });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::mul, "mul"); }

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: empty tensor list");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) +
                         " out of range for " + to_string(first));
  }
  std::size_t along = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) ok = false;
    }
    if (!ok) {
      throw DimensionError("concat: shape " + to_string(s) +
                           " does not match " + to_string(first) +
                           " off axis " + std::to_string(axis));
    }
    along += s[axis];
  }
  // Treat every tensor as [outer, axis extent * inner].
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  Shape shape = first;
  shape[axis] = along;
  Buffer out(element_count(shape));
  std::vector<std::size_t> widths;
  widths.reserve(parts.size());
  for (const auto& p : parts) widths.push_back(p.shape()[axis] * inner);
  const std::size_t row = along * inner;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto v = parts[i].values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.data() + o * widths[i], widths[i],
                  out.data() + o * row + offset);
    }
    offset += widths[i];
  }
  return record_many(std::move(shape), std::move(out), parts,
                     [widths, outer, row](Node& self) {
                       std::size_t offset = 0;
                       for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                         auto& in = *self.inputs[i];
                         if (wants_grad(in)) {
                           auto& g = in.sink();
                           for (std::size_t o = 0; o < outer; ++o) {
                             const double* src = self.grad.data() + o * row + offset;
                             double* dst = g.data() + o * widths[i];
                             for (std::size_t j = 0; j < widths[i]; ++j) dst[j] += src[j];
                           }
                         }
                         offset += widths[i];
                       }
                     });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end) {
  const Shape& s = x.shape();
  if (axis >= s.size() || begin >= end || end > s[axis]) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") on axis " +
                         std::to_string(axis) + " invalid for " + to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t src_row = s[axis] * inner;
  const std::size_t width = (end - begin) * inner;
  const std::size_t start = begin * inner;
  Shape shape = s;
  shape[axis] = end - begin;
  Buffer out(outer * width);
  auto v = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(v.data() + o * src_row + start, width, out.data() + o * width);
  }
  return record(std::move(shape), std::move(out), {&x},
                [outer, src_row, width, start](Node& self) {
                  auto& g = self.inputs[0]->sink();
                  for (std::size_t o = 0; o < outer; ++o) {
                    const double* src = self.grad.data() + o * width;
                    double* dst = g.data() + o * src_row + start;
                    for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
                  }
                });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (element_count(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) +
                         " as " + to_string(shape));
  }
  Buffer out(x.values().begin(), x.values().end());
  return record(std::move(shape), std::move(out), {&x}, [](Node& self) {
    auto& g = self.inputs[0]->sink();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor softmax(const Tensor& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  auto v = x.values();
  Buffer out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = v.data() + r * n;
    double* y = out.data() + r * n;
    const double peak = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(in[j] - peak);
      total += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= total;
  }
  return record(x.shape(), std::move(out), {&x}, [rows, n](Node& self) {
    auto& g = self.inputs[0]->sink();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * n;
      const double* dy = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += y[j] * dy[j];
      for (std::size_t j = 0; j < n; ++j) g[r * n + j] += y[j] * (dy[j] - dot);
    }
  });
}

Tensor scale_rows(const Tensor& x, const Tensor& factors) {
  const std::size_t m = x.rows(), n = x.cols();
  if (factors.size() != m) {
    throw DimensionError("scale_rows: " + to_string(factors.shape()) +
                         " factors for " + to_string(x.shape()));
  }
  auto v = x.values();
  auto f = factors.values();
  Buffer out(x.size());
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = v[r * n + j] * f[r];
  }
  return record(x.shape(), std::move(out), {&x, &factors}, [m, n](Node& self) {
    auto& nx = *self.inputs[0];
    auto& nf = *self.inputs[1];
    if (wants_grad(nx)) {
      auto& g = nx.sink();
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t j = 0; j < n; ++j) {
          g[r * n + j] += self.grad[r * n + j] * nf.value[r];
        }
      }
    }
    if (wants_grad(nf)) {
      auto& g = nf.sink();
      for (std::size_t r = 0; r < m; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          acc += self.grad[r * n + j] * nx.value[r * n + j];
        }
        g[r] += acc;
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return record({1}, {total}, {&x}, [](Node& self) {
    auto& g = self.inputs[0]->sink();
    for (auto& gi : g) gi += self.grad[0];
  });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  return mse_loss(pred, target, Tensor(pred.shape(), 1.0));
}

Tensor mse_loss(const Tensor& pred, const Tensor& target, const Tensor& mask) {
  if (pred.size() != target.size() || pred.size() != mask.size()) {
    throw DimensionError("mse_loss: prediction " + to_string(pred.shape()) +
                         ", target " + to_string(target.shape()) +
                         " and mask " + to_string(mask.shape()) +
                         " lengths differ");
  }
  auto p = pred.values();
  auto t = target.values();
  auto w = mask.values();
  double weight = 0.0, total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    total += w[i] * d * d;
    weight += w[i];
  }
  if (weight <= 0.0) throw ContractError("mse_loss: mask selects no entries");
  return record({1}, {total / weight}, {&pred},
                [t = Buffer(t.begin(), t.end()),
                 w = Buffer(w.begin(), w.end()), weight](Node& self) {
                  auto& in = *self.inputs[0];
                  auto& g = in.sink();
                  const double scale = 2.0 * self.grad[0] / weight;
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += scale * w[i] * (in.value[i] - t[i]);
                  }
                });
}

Tensor concordance_loss(const Tensor& pred, const Tensor& target,
                        const Tensor& mask) {
  if (pred.shape() != target.shape() || pred.shape() != mask.shape()) {
    throw DimensionError("concordance_loss: prediction " +
                         to_string(pred.shape()) + ", target " +
                         to_string(target.shape()) + " and mask " +
                         to_string(mask.shape()) + " differ");
  }
  const std::size_t m = pred.rows(), n = pred.cols();
  auto p = pred.values();
  auto t = target.values();
  auto w = mask.values();

  struct Column {
    double count = 0, mean_p = 0, mean_t = 0, var_p = 0, var_t = 0, cov = 0;
    double numer = 0, denom = 0;
  };
  std::vector<Column> cols(n);
  double loss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    auto& c = cols[j];
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t i = r * n + j;
      c.count += w[i];
      c.mean_p += w[i] * p[i];
      c.mean_t += w[i] * t[i];
    }
    if (c.count <= 0.0) throw ContractError("concordance_loss: empty column");
    c.mean_p /= c.count;
    c.mean_t /= c.count;
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t i = r * n + j;
      const double dp = p[i] - c.mean_p, dt = t[i] - c.mean_t;
      c.var_p += w[i] * dp * dp;
      c.var_t += w[i] * dt * dt;
      c.cov += w[i] * dp * dt;
    }
    c.var_p /= c.count;
    c.var_t /= c.count;
    c.cov /= c.count;
    const double gap = c.mean_p - c.mean_t;
    c.numer = 2.0 * c.cov;
    c.denom = c.var_p + c.var_t + gap * gap;
    loss += 1.0 - (c.denom > 0.0 ? c.numer / c.denom : 1.0);
  }
  loss /= static_cast<double>(n);
  return record({1}, {loss}, {&pred},
                [cols, m, n, t = Buffer(t.begin(), t.end()),
                 w = Buffer(w.begin(), w.end())](Node& self) {
                  auto& in = *self.inputs[0];
                  auto& g = in.sink();
                  const double upstream = -self.grad[0] / static_cast<double>(n);
                  for (std::size_t j = 0; j < n; ++j) {
                    const auto& c = cols[j];
                    if (c.denom <= 0.0) continue;
                    const double gap = c.mean_p - c.mean_t;
                    for (std::size_t r = 0; r < m; ++r) {
                      const std::size_t i = r * n + j;
                      if (w[i] == 0.0) continue;
                      const double scale = w[i] / c.count;
                      const double d_numer = 2.0 * scale * (t[i] - c.mean_t);
                      const double d_denom =
                          2.0 * scale * (in.value[i] - c.mean_p) + 2.0 * gap * scale;
                      const double d_ccc =
                          (d_numer * c.denom - c.numer * d_denom) / (c.denom * c.denom);
                      g[i] += upstream * d_ccc;
                    }
                  }
                });
}

}  // namespace empathy::ops
