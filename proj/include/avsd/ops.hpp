#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "avsd/tensor.hpp"

// Differentiable primitives. Every operation registers its gradient rule when
// recording is enabled. Reductions run in a fixed index order, so repeated
// evaluation on identical inputs is bitwise identical.
namespace avsd::nc {

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x[m x k] * w[k x n] + bias[n]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

// a[m x n] + row[n], broadcast over rows.
template <typename T>
Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& row);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c);

template <typename T>
Tensor<T> sum(const Tensor<T>& a);

// Mean over one axis; the axis is removed from the shape.
template <typename T>
Tensor<T> mean(const Tensor<T>& a, std::size_t axis);

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis);

// Normalizes over the last axis.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     double eps = 1e-5);

// tanh approximation.
template <typename T>
Tensor<T> gelu(const Tensor<T>& a);

template <typename T>
Tensor<T> relu(const Tensor<T>& a);

// Rows of `table` selected by `ids`; the gradient accumulates into the rows.
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<std::int32_t>& ids);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start, std::size_t length);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

// Mean negative log-likelihood over rows whose target is not `ignore_id`.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::int32_t>& targets,
                        std::int32_t ignore_id);

// Which keys each query row may attend to, in CSR layout. Rows with an empty
// key set produce a zero output.
struct AttentionPattern {
  std::size_t rows = 0;
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> keys;

  void add_row(const std::vector<std::uint32_t>& row_keys);
  std::size_t key_count(std::size_t row) const { return offsets[row + 1] - offsets[row]; }

  static AttentionPattern causal(std::size_t n);
};

// Multi-head scaled dot-product attention over a packed projection
// qkv[n x 3d] (queries, keys, values side by side). Returns [n x d].
template <typename T>
Tensor<T> attention(const Tensor<T>& qkv, std::size_t heads,
                    std::shared_ptr<const AttentionPattern> pattern);

}  // namespace avsd::nc
