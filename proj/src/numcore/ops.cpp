#include "avsd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "avsd/error.hpp"

namespace avsd::nc {
namespace {

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_matrix(const Shape& s, const char* op) {
  if (s.size() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(s));
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

// c[m x n] += a[m x k] * b[k x n]
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
std::vector<T> transposed(const T* a, std::size_t rows, std::size_t cols) {
  std::vector<T> t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  }
  return t;
}

// Gradients of c = a * b given dc.
template <typename T>
void gemm_backward(Node<T>& a, Node<T>& b, const T* dc, std::size_t m, std::size_t k,
                   std::size_t n) {
  if (a.requires_grad) {
    const auto bt = transposed(b.value.data(), k, n);  // [n x k]
    gemm_acc(dc, bt.data(), a.grad.data(), m, n, k);
  }
  if (b.requires_grad) {
    const auto at = transposed(a.value.data(), m, k);  // [k x m]
    gemm_acc(at.data(), dc, b.grad.data(), k, m, n);
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> c(m * n, T(0));
  gemm_acc(a.data().data(), b.data().data(), c.data(), m, k, n);
  return make_result<T>({m, n}, std::move(c), {a.node(), b.node()}, [m, k, n](Node<T>& self) {
    gemm_backward(*self.parents[0], *self.parents[1], self.grad.data(), m, k, n);
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0) || bias.size() != w.dim(1)) {
    throw DimensionError("linear: incompatible shapes x" + shape_str(x.shape()) + " w" +
                         shape_str(w.shape()) + " b" + shape_str(bias.shape()));
  }
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  std::vector<T> c(m * n);
  const auto b = bias.data();
  for (std::size_t i = 0; i < m; ++i) std::copy(b.begin(), b.end(), c.begin() + i * n);
  gemm_acc(x.data().data(), w.data().data(), c.data(), m, k, n);
  return make_result<T>({m, n}, std::move(c), {x.node(), w.node(), bias.node()},
                        [m, k, n](Node<T>& self) {
                          gemm_backward(*self.parents[0], *self.parents[1], self.grad.data(), m,
                                        k, n);
                          auto& bn = *self.parents[2];
                          if (bn.requires_grad) {
                            for (std::size_t i = 0; i < m; ++i) {
                              for (std::size_t j = 0; j < n; ++j) bn.grad[j] += self.grad[i * n + j];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_matrix(a.shape(), "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  return make_result<T>({n, m}, transposed(a.data().data(), m, n), {a.node()},
                        [m, n](Node<T>& self) {
                          auto& an = *self.parents[0];
                          for (std::size_t i = 0; i < m; ++i) {
                            for (std::size_t j = 0; j < n; ++j) an.grad[i * n + j] += self.grad[j * m + i];
                          }
                        });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a.shape(), b.shape(), "add");
  std::vector<T> c(a.size());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = av[i] + bv[i];
  return make_result<T>(a.shape(), std::move(c), {a.node(), b.node()}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& row) {
  require_matrix(a.shape(), "add_row");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (row.size() != n) {
    throw DimensionError("add_row: row " + shape_str(row.shape()) + " does not match " +
                         shape_str(a.shape()));
  }
  std::vector<T> c(m * n);
  const auto av = a.data(), rv = row.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = av[i * n + j] + rv[j];
  }
  return make_result<T>(a.shape(), std::move(c), {a.node(), row.node()}, [m, n](Node<T>& self) {
    auto& an = *self.parents[0];
    auto& rn = *self.parents[1];
    if (an.requires_grad) {
      for (std::size_t i = 0; i < m * n; ++i) an.grad[i] += self.grad[i];
    }
    if (rn.requires_grad) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) rn.grad[j] += self.grad[i * n + j];
      }
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a.shape(), b.shape(), "mul");
  std::vector<T> c(a.size());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = av[i] * bv[i];
  return make_result<T>(a.shape(), std::move(c), {a.node(), b.node()}, [](Node<T>& self) {
    auto& an = *self.parents[0];
    auto& bn = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (an.requires_grad) an.grad[i] += self.grad[i] * bn.value[i];
      if (bn.requires_grad) bn.grad[i] += self.grad[i] * an.value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> out(a.size());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  return make_result<T>(a.shape(), std::move(out), {a.node()}, [c](Node<T>& self) {
    auto& an = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += self.grad[i] * c;
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = T(0);
  for (auto v : a.data()) s += v;
  return make_result<T>({}, {s}, {a.node()}, [](Node<T>& self) {
    auto& an = *self.parents[0];
    for (auto& g : an.grad) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a, std::size_t axis) {
  const auto s = split_axis(a.shape(), axis, "mean");
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<T> out(s.outer * s.inner, T(0));
  const auto av = a.data();
  const T inv = T(1) / static_cast<T>(s.len);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = 0; l < s.len; ++l) {
      const T* src = av.data() + (o * s.len + l) * s.inner;
      T* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  for (auto& v : out) v *= inv;
  return make_result<T>(std::move(out_shape), std::move(out), {a.node()}, [s, inv](Node<T>& self) {
    auto& an = *self.parents[0];
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t l = 0; l < s.len; ++l) {
        T* dst = an.grad.data() + (o * s.len + l) * s.inner;
        const T* g = self.grad.data() + o * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += g[i] * inv;
      }
    }
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis) {
  const auto s = split_axis(a.shape(), axis, "softmax");
  std::vector<T> out(a.size());
  const auto av = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t l = 0; l < s.len; ++l) mx = std::max(mx, av[base + l * s.inner]);
      T total = T(0);
      for (std::size_t l = 0; l < s.len; ++l) {
        const T e = std::exp(av[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= total;
    }
  }
  return make_result<T>(a.shape(), std::move(out), {a.node()}, [s](Node<T>& self) {
    auto& an = *self.parents[0];
    const auto& y = self.value;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        T dot = T(0);
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t idx = base + l * s.inner;
          dot += self.grad[idx] * y[idx];
        }
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t idx = base + l * s.inner;
          an.grad[idx] += y[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, double eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError("layer_norm: gain" + shape_str(gain.shape()) + "/bias" +
                         shape_str(bias.shape()) + " do not match " + shape_str(x.shape()));
  }
  const std::size_t rows = x.size() / d;
  std::vector<T> out(x.size()), xhat(x.size()), rstd(rows);
  const auto xv = x.data(), gv = gain.data(), bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T mu = T(0);
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + static_cast<T>(eps));
    rstd[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mu) * rs;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), {x.node(), gain.node(), bias.node()},
      [d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& gn = *self.parents[1];
        auto& bn = *self.parents[2];
        const auto& g = self.grad;
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t off = r * d;
          if (gn.requires_grad) {
            for (std::size_t j = 0; j < d; ++j) gn.grad[j] += g[off + j] * xhat[off + j];
          }
          if (bn.requires_grad) {
            for (std::size_t j = 0; j < d; ++j) bn.grad[j] += g[off + j];
          }
          if (xn.requires_grad) {
            T mean_dy = T(0), mean_dy_xhat = T(0);
            for (std::size_t j = 0; j < d; ++j) {
              const T dy = g[off + j] * gn.value[j];
              mean_dy += dy;
              mean_dy_xhat += dy * xhat[off + j];
            }
            mean_dy /= static_cast<T>(d);
            mean_dy_xhat /= static_cast<T>(d);
            for (std::size_t j = 0; j < d; ++j) {
              const T dy = g[off + j] * gn.value[j];
              xn.grad[off + j] += rstd[r] * (dy - mean_dy - xhat[off + j] * mean_dy_xhat);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  constexpr T kC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = static_cast<T>(0.044715);
  std::vector<T> out(a.size());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = av[i];
    out[i] = T(0.5) * x * (T(1) + std::tanh(kC * (x + kA * x * x * x)));
  }
  return make_result<T>(a.shape(), std::move(out), {a.node()}, [](Node<T>& self) {
    auto& an = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T x = an.value[i];
      const T t = std::tanh(kC * (x + kA * x * x * x));
      const T dt = (T(1) - t * t) * kC * (T(1) + T(3) * kA * x * x);
      an.grad[i] += self.grad[i] * (T(0.5) * (T(1) + t) + T(0.5) * x * dt);
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > T(0) ? av[i] : T(0);
  return make_result<T>(a.shape(), std::move(out), {a.node()}, [](Node<T>& self) {
    auto& an = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (an.value[i] > T(0)) an.grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<std::int32_t>& ids) {
  require_matrix(table.shape(), "embedding");
  if (ids.empty()) throw DimensionError("embedding: empty id list");
  const std::size_t rows = table.dim(0), d = table.dim(1);
  std::vector<T> out(ids.size() * d);
  const auto tv = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= rows) {
      throw RangeError("embedding: lookup id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(rows) + " rows");
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d, out.begin() + i * d);
  }
  return make_result<T>({ids.size(), d}, std::move(out), {table.node()}, [ids, d](Node<T>& self) {
    auto& tn = *self.parents[0];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      T* dst = tn.grad.data() + static_cast<std::size_t>(ids[i]) * d;
      const T* g = self.grad.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += g[j];
    }
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const auto s0 = split_axis(first, axis, "concat");
  std::vector<std::size_t> lens;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto s = split_axis(p.shape(), axis, "concat");
    if (p.rank() != first.size() || s.outer != s0.outer || s.inner != s0.inner) {
      throw DimensionError("concat: " + shape_str(p.shape()) + " incompatible with " +
                           shape_str(first) + " along axis " + std::to_string(axis));
    }
    lens.push_back(s.len);
    total += s.len;
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  std::vector<T> out(s0.outer * total * s0.inner);
  std::vector<NodePtr<T>> nodes;
  for (std::size_t o = 0; o < s0.outer; ++o) {
    std::size_t at = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const std::size_t chunk = lens[k] * s0.inner;
      const auto src = parts[k].data();
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * total * s0.inner + at));
      at += chunk;
    }
  }
  for (const auto& p : parts) nodes.push_back(p.node());
  const std::size_t outer = s0.outer, inner = s0.inner;
  return make_result<T>(std::move(out_shape), std::move(out), std::move(nodes),
                        [lens, total, outer, inner](Node<T>& self) {
                          for (std::size_t o = 0; o < outer; ++o) {
                            std::size_t at = 0;
                            for (std::size_t k = 0; k < lens.size(); ++k) {
                              const std::size_t chunk = lens[k] * inner;
                              auto& pn = *self.parents[k];
                              if (pn.requires_grad) {
                                const T* g = self.grad.data() + o * total * inner + at;
                                T* dst = pn.grad.data() + o * chunk;
                                for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[i];
                              }
                              at += chunk;
                            }
                          }
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start, std::size_t length) {
  const auto s = split_axis(a.shape(), axis, "slice");
  if (length == 0 || start + length > s.len) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") outside axis " +
                         std::to_string(axis) + " of " + shape_str(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  std::vector<T> out(s.outer * length * s.inner);
  const auto av = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>((o * s.len + start) * s.inner),
                length * s.inner, out.begin() + static_cast<std::ptrdiff_t>(o * length * s.inner));
  }
  return make_result<T>(std::move(out_shape), std::move(out), {a.node()},
                        [s, start, length](Node<T>& self) {
                          auto& an = *self.parents[0];
                          for (std::size_t o = 0; o < s.outer; ++o) {
                            T* dst = an.grad.data() + (o * s.len + start) * s.inner;
                            const T* g = self.grad.data() + o * length * s.inner;
                            for (std::size_t i = 0; i < length * s.inner; ++i) dst[i] += g[i];
                          }
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  return make_result<T>(std::move(shape), std::vector<T>(a.data().begin(), a.data().end()),
                        {a.node()}, [](Node<T>& self) {
                          auto& an = *self.parents[0];
                          for (std::size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += self.grad[i];
                        });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::int32_t>& targets,
                        std::int32_t ignore_id) {
  require_matrix(logits.shape(), "cross_entropy");
  const std::size_t n = logits.dim(0), v = logits.dim(1);
  if (targets.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         shape_str(logits.shape()) + " logits");
  }
  std::size_t kept = 0;
  for (auto t : targets) {
    if (t == ignore_id) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= v) {
      throw RangeError("cross_entropy: target " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(v));
    }
    ++kept;
  }
  if (kept == 0) throw InputError("cross_entropy: every position is ignored (degenerate batch)");

  const auto lv = logits.data();
  std::vector<T> probs(n * v, T(0));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] == ignore_id) continue;
    const T* row = lv.data() + i * v;
    const T mx = *std::max_element(row, row + v);
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += std::exp(static_cast<double>(row[j] - mx));
    const double lse = static_cast<double>(mx) + std::log(z);
    total += lse - static_cast<double>(row[targets[i]]);
    for (std::size_t j = 0; j < v; ++j) {
      probs[i * v + j] = static_cast<T>(std::exp(static_cast<double>(row[j]) - lse));
    }
  }
  const T loss = static_cast<T>(total / static_cast<double>(kept));
  const T inv = T(1) / static_cast<T>(kept);
  return make_result<T>({}, {loss}, {logits.node()},
                        [targets, ignore_id, n, v, inv, probs = std::move(probs)](Node<T>& self) {
                          auto& ln = *self.parents[0];
                          const T g = self.grad[0] * inv;
                          for (std::size_t i = 0; i < n; ++i) {
                            if (targets[i] == ignore_id) continue;
                            for (std::size_t j = 0; j < v; ++j) ln.grad[i * v + j] += g * probs[i * v + j];
                            ln.grad[i * v + static_cast<std::size_t>(targets[i])] -= g;
                          }
                        });
}

void AttentionPattern::add_row(const std::vector<std::uint32_t>& row_keys) {
  keys.insert(keys.end(), row_keys.begin(), row_keys.end());
  offsets.push_back(static_cast<std::uint32_t>(keys.size()));
  ++rows;
}

AttentionPattern AttentionPattern::causal(std::size_t n) {
  AttentionPattern p;
  std::vector<std::uint32_t> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.push_back(static_cast<std::uint32_t>(i));
    p.add_row(row);
  }
  return p;
}

template <typename T>
Tensor<T> attention(const Tensor<T>& qkv, std::size_t heads,
                    std::shared_ptr<const AttentionPattern> pattern) {
  require_matrix(qkv.shape(), "attention");
  const std::size_t n = qkv.dim(0), width = qkv.dim(1);
  if (width % 3 != 0 || heads == 0 || (width / 3) % heads != 0) {
    throw DimensionError("attention: packed width " + std::to_string(width) +
                         " not divisible into 3 x " + std::to_string(heads) + " heads");
  }
  if (!pattern || pattern->rows != n) {
    throw DimensionError("attention: pattern rows do not match " + shape_str(qkv.shape()));
  }
  for (auto k : pattern->keys) {
    if (k >= n) throw DimensionError("attention: pattern key " + std::to_string(k) + " >= " + std::to_string(n));
  }
  const std::size_t d = width / 3, dh = d / heads;
  const T sc = T(1) / std::sqrt(static_cast<T>(dh));
  const std::size_t nnz = pattern->keys.size();
  const auto x = qkv.data();
  std::vector<T> out(n * d, T(0));
  std::vector<T> probs(heads * nnz);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = pattern->offsets[i], e = pattern->offsets[i + 1];
    if (b == e) continue;
    for (std::size_t h = 0; h < heads; ++h) {
      const T* q = x.data() + i * width + h * dh;
      T* p = probs.data() + h * nnz;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t s = b; s < e; ++s) {
        const T* k = x.data() + pattern->keys[s] * width + d + h * dh;
        T dot = T(0);
        for (std::size_t c = 0; c < dh; ++c) dot += q[c] * k[c];
        p[s] = dot * sc;
        mx = std::max(mx, p[s]);
      }
      T total = T(0);
      for (std::size_t s = b; s < e; ++s) {
        p[s] = std::exp(p[s] - mx);
        total += p[s];
      }
      T* o = out.data() + i * d + h * dh;
      for (std::size_t s = b; s < e; ++s) {
        p[s] /= total;
        const T* v = x.data() + pattern->keys[s] * width + 2 * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) o[c] += p[s] * v[c];
      }
    }
  }

  return make_result<T>(
      {n, d}, std::move(out), {qkv.node()},
      [pattern, heads, n, d, dh, width, sc, nnz, probs = std::move(probs)](Node<T>& self) {
        auto& xn = *self.parents[0];
        const T* xv = xn.value.data();
        T* gx = xn.grad.data();
        std::vector<T> dp;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t b = pattern->offsets[i], e = pattern->offsets[i + 1];
          if (b == e) continue;
          dp.resize(e - b);
          for (std::size_t h = 0; h < heads; ++h) {
            const T* g = self.grad.data() + i * d + h * dh;
            const T* p = probs.data() + h * nnz;
            T weighted = T(0);
            for (std::size_t s = b; s < e; ++s) {
              const std::size_t key = pattern->keys[s];
              const T* v = xv + key * width + 2 * d + h * dh;
              T* gv = gx + key * width + 2 * d + h * dh;
              T acc = T(0);
              for (std::size_t c = 0; c < dh; ++c) {
                acc += g[c] * v[c];
                gv[c] += p[s] * g[c];
              }
              dp[s - b] = acc;
              weighted += p[s] * acc;
            }
            const T* q = xv + i * width + h * dh;
            T* gq = gx + i * width + h * dh;
            for (std::size_t s = b; s < e; ++s) {
              const T ds = p[s] * (dp[s - b] - weighted) * sc;
              const std::size_t key = pattern->keys[s];
              const T* k = xv + key * width + d + h * dh;
              T* gk = gx + key * width + d + h * dh;
              for (std::size_t c = 0; c < dh; ++c) {
                gq[c] += ds * k[c];
                gk[c] += ds * q[c];
              }
            }
          }
        }
      });
}

#define AVSD_INSTANTIATE_OPS(T)                                                                 \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> transpose(const Tensor<T>&);                                               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> add_row(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> scale(const Tensor<T>&, T);                                                \
  template Tensor<T> sum(const Tensor<T>&);                                                     \
  template Tensor<T> mean(const Tensor<T>&, std::size_t);                                       \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                    \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);  \
  template Tensor<T> gelu(const Tensor<T>&);                                                    \
  template Tensor<T> relu(const Tensor<T>&);                                                    \
  template Tensor<T> embedding(const Tensor<T>&, const std::vector<std::int32_t>&);             \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                        \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);            \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                          \
  template Tensor<T> cross_entropy(const Tensor<T>&, const std::vector<std::int32_t>&,          \
                                   std::int32_t);                                               \
  template Tensor<T> attention(const Tensor<T>&, std::size_t,                                   \
                               std::shared_ptr<const AttentionPattern>);

AVSD_INSTANTIATE_OPS(float)
AVSD_INSTANTIATE_OPS(double)

}  // namespace avsd::nc
