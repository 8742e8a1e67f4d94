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

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace empathy {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// 64-byte aligned allocator. Vectorised kernels pick their summation order
/// from buffer alignment, so a fixed alignment keeps results bit-identical
/// from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

namespace detail {

/// Deferred weight-gradient contribution grad += lhs^T * rhs, where lhs is
/// rows x k and rhs is rows x n. Leaf parameters reused at every time step
/// collect these and resolve them with a single stacked product.
struct PendingOuter {
  Buffer lhs;
  Buffer rhs;
  std::size_t rows = 0;
};

struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;
  bool requires_grad = false;
  bool leaf = true;

  // Set only for recorded (non-leaf) nodes.
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  // Leaf-only scratch used during one backward sweep.
  Buffer pass_grad;
  std::vector<PendingOuter> pending;

  Buffer& sink();
};

/// grad(target) += lhs^T * rhs. Deferred for leaves, immediate otherwise.
void accumulate_outer(Node& target, std::span<const double> lhs,
                      std::span<const double> rhs, std::size_t rows);

}  // namespace detail

/// Dense row-major array of doubles with an optional gradient accumulator.
///
/// A Tensor is a shared handle: copies alias the same storage, which is how
/// the tape keeps references to operands. Use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  /// Takes ownership of an already-aligned buffer.
  static Tensor adopt(Shape shape, Buffer values);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  // Rank-1 tensors behave as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t index) const { return values()[index]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  /// Sets the gradient to zeros (allocating it when grad is required).
  void zero_grad();

  /// Deep copy of the values, detached from any tape.
  Tensor clone() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node)
      : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Records differentiable operations for one forward pass.
///
/// Constructing a Tape makes it the active tape of the calling thread until
/// it is destroyed; tapes nest. Operations whose inputs require gradients are
/// recorded only while a tape is active, so inference runs without one.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  void record(std::shared_ptr<detail::Node> node);
  std::size_t size() const { return nodes_.size(); }

  /// Propagates d(loss)/d(x) into every reachable requires_grad leaf.
  /// Leaf gradients accumulate across calls until zeroed.
  void backward(const Tensor& loss);

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  Tape* previous_ = nullptr;
};

/// backward() on the active tape of this thread.
void backward(const Tensor& loss);

}  // namespace empathy
