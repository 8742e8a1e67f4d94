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

#include "empathy/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include <Eigen/Core>

#include "empathy/errors.hpp"

namespace empathy {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

thread_local Tape* active_tape = nullptr;

const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw ContractError("use of an undefined tensor");
  return *node;
}

void flush_pending(detail::Node& leaf) {
  if (leaf.pending.empty()) return;
  const std::size_t k = leaf.shape.size() == 2 ? leaf.shape[0] : 1;
  const std::size_t n = leaf.value.size() / k;
  Map target(leaf.pass_grad.data(), static_cast<Eigen::Index>(k),
             static_cast<Eigen::Index>(n));
  if (leaf.pending.size() == 1) {
    const auto& p = leaf.pending.front();
    ConstMap lhs(p.lhs.data(), p.rows, k);
    ConstMap rhs(p.rhs.data(), p.rows, n);
    target.noalias() += lhs.transpose() * rhs;
  } else {
    std::size_t total = 0;
    for (const auto& p : leaf.pending) total += p.rows;
    RowMatrix lhs(total, k);
    RowMatrix rhs(total, n);
    std::size_t offset = 0;
    for (const auto& p : leaf.pending) {
      lhs.middleRows(offset, p.rows) = ConstMap(p.lhs.data(), p.rows, k);
      rhs.middleRows(offset, p.rows) = ConstMap(p.rhs.data(), p.rows, n);
      offset += p.rows;
    }
    target.noalias() += lhs.transpose() * rhs;
  }
  leaf.pending.clear();
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

namespace detail {

Buffer& Node::sink() {
  auto& buffer = leaf ? pass_grad : grad;
  if (buffer.empty()) buffer.assign(value.size(), 0.0);
  return buffer;
}

void accumulate_outer(Node& target, std::span<const double> lhs,
                      std::span<const double> rhs, std::size_t rows) {
  if (target.leaf) {
    target.pending.push_back(
        {Buffer(lhs.begin(), lhs.end()), Buffer(rhs.begin(), rhs.end()), rows});
    return;
  }
  const std::size_t k = lhs.size() / rows;
  const std::size_t n = rhs.size() / rows;
  auto& g = target.sink();
  Map(g.data(), k, n).noalias() +=
      ConstMap(lhs.data(), rows, k).transpose() * ConstMap(rhs.data(), rows, n);
}

}  // namespace detail

Tensor::Tensor(Shape shape, double fill)
    : node_(std::make_shared<detail::Node>()) {
  for (auto extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  }
  node_->value.assign(element_count(shape), fill);
  node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : node_(std::make_shared<detail::Node>()) {
  for (auto extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  }
  if (element_count(shape) != values.size()) {
    throw DimensionError("shape " + to_string(shape) + " holds " +
                         std::to_string(element_count(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->value.assign(values.begin(), values.end());
}

Tensor Tensor::adopt(Shape shape, Buffer values) {
  for (auto extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  }
  if (element_count(shape) != values.size()) {
    throw DimensionError("shape " + to_string(shape) + " holds " +
                         std::to_string(element_count(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

const Shape& Tensor::shape() const { return checked(node_).shape; }
std::size_t Tensor::size() const { return checked(node_).value.size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  return s.size() >= 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  return s.size() >= 2 ? size() / s[0] : size();
}

std::span<const double> Tensor::values() const { return checked(node_).value; }

std::span<double> Tensor::mutable_values() {
  checked(node_);
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar tensor of shape " + to_string(shape()));
  return node_->value.front();
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  checked(node_);
  node_->requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

std::span<const double> Tensor::grad() const { return checked(node_).grad; }

std::span<double> Tensor::mutable_grad() {
  checked(node_);
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  checked(node_);
  auto& n = *node_;
  if (n.requires_grad || !n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
}

Tensor Tensor::clone() const {
  const auto& n = checked(node_);
  Tensor copy = Tensor::adopt(n.shape, n.value);
  copy.node_->requires_grad = n.requires_grad && n.leaf;
  return copy;
}

Tape::Tape() : previous_(active_tape) { active_tape = this; }

Tape::~Tape() { active_tape = previous_; }

Tape* Tape::current() { return active_tape; }

void Tape::record(std::shared_ptr<detail::Node> node) {
  nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  auto& root = *loss.node();
  if (!root.requires_grad) {
    throw ContractError("backward: loss was not produced under an active tape from tensors requiring grad");
  }

  std::vector<detail::Node*> leaves;
  std::unordered_set<detail::Node*> seen;
  auto visit_leaf = [&](detail::Node* n) {
    if (n->leaf && n->requires_grad && seen.insert(n).second) {
      n->pass_grad.assign(n->value.size(), 0.0);
      n->pending.clear();
      leaves.push_back(n);
    }
  };
  for (auto& node : nodes_) {
    node->grad.clear();
    for (auto& input : node->inputs) visit_leaf(input.get());
  }
  visit_leaf(&root);

  root.sink()[0] += 1.0;

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto& node = **it;
    if (node.grad.empty() || !node.backward) continue;
    node.backward(node);
  }

  for (auto* leaf : leaves) {
    flush_pending(*leaf);
    if (leaf->grad.empty()) leaf->grad.assign(leaf->value.size(), 0.0);
    for (std::size_t i = 0; i < leaf->grad.size(); ++i) {
      leaf->grad[i] += leaf->pass_grad[i];
    }
    leaf->pass_grad.clear();
    leaf->pass_grad.shrink_to_fit();
  }
}

void backward(const Tensor& loss) {
  auto* tape = Tape::current();
  if (!tape) throw ContractError("backward: no active tape on this thread");
  tape->backward(loss);
}

}  // namespace empathy
