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

#include <span>
#include <vector>

#include "empathy/tensor.hpp"

/// Differentiable primitives. Each records its local gradient rule on the
/// active tape when any operand requires grad. Shapes are strict: the only
/// broadcast supported is a size-1 operand in the elementwise binaries.
namespace empathy::ops {

Tensor matmul(const Tensor& a, const Tensor& b);

/// x * weight + bias, with bias added to every row. A rank-1 x is treated as a
/// single row and yields a rank-1 result.
Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);

/// Softmax along the last axis, stabilised by max subtraction.
Tensor softmax(const Tensor& x);

/// Multiplies row r of x[m x n] by factors[r]; factors has m entries.
Tensor scale_rows(const Tensor& x, const Tensor& factors);

Tensor sum(const Tensor& x);

Tensor mse_loss(const Tensor& pred, const Tensor& target);

/// Mean squared error over entries with nonzero mask weight, normalised by
/// the total mask weight. The target and mask never receive gradients.
Tensor mse_loss(const Tensor& pred, const Tensor& target, const Tensor& mask);

/// Mean over columns of (1 - CCC) where each column of pred[m x n] is one
/// sequence; rows with zero mask are excluded from the column moments.
Tensor concordance_loss(const Tensor& pred, const Tensor& target,
                        const Tensor& mask);

}  // namespace empathy::ops
