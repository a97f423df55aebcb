#include "gazeworld/ops.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "gazeworld/kernels.hpp"

namespace gazeworld::ops {

namespace {

template <typename T>
using Node = detail::Node<T>;
template <typename T>
using Ctx = detail::BackwardCtx<T>;

template <typename T>
const kernels::KernelTable<T>& kt() {
  return kernels::active<T>();
}

template <typename T>
void check(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

template <typename T>
Tensor<T> make_op(Shape shape, std::vector<T> value, std::vector<Tensor<T>> inputs,
                  std::function<void(const Ctx<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool track = autograd::grad_enabled();
  if (track) {
    track = false;
    for (const auto& in : inputs) track = track || in.requires_grad();
  }
  if (track) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (auto& in : inputs) n->parents.push_back(in.node_ptr());
    n->backward = std::move(backward);
  }
  return Tensor<T>(std::move(n));
}

// C(m,n) += A(m,k) * B(k,n); row-accumulation through the axpy kernel so all
// backends produce identical bits.
template <typename T>
void mm_nn(const T* a, std::size_t m, std::size_t k, const T* b, std::size_t n, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) kt<T>().axpy(arow[p], b + p * n, crow, n);
  }
}

// C(m,k) += A(m,n) * B(k,n)^T.
template <typename T>
void mm_nt(const T* a, std::size_t m, std::size_t n, const T* b, std::size_t k, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * n;
    T* crow = c + i * k;
    for (std::size_t j = 0; j < k; ++j) crow[j] = crow[j] + kt<T>().dot(arow, b + j * n, n);
  }
}

// C(k,n) += A(m,k)^T * B(m,n).
template <typename T>
void mm_tn(const T* a, std::size_t m, std::size_t k, const T* b, std::size_t n, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) kt<T>().axpy(arow[p], brow, c + p * n, n);
  }
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check<T>(a.shape() == b.shape(), "add: shape mismatch");
  std::vector<T> out(a.size());
  kt<T>().add(a.data().data(), b.data().data(), out.data(), out.size());
  return make_op<T>(a.shape(), std::move(out), {a, b}, [](const Ctx<T>& ctx) {
    const std::size_t n = ctx.node.value.size();
    if (T* ga = ctx.parent_grad(0)) kt<T>().axpy(T(1), ctx.out_grad, ga, n);
    if (T* gb = ctx.parent_grad(1)) kt<T>().axpy(T(1), ctx.out_grad, gb, n);
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check<T>(a.shape() == b.shape(), "sub: shape mismatch");
  std::vector<T> out(a.size());
  kt<T>().sub(a.data().data(), b.data().data(), out.data(), out.size());
  return make_op<T>(a.shape(), std::move(out), {a, b}, [](const Ctx<T>& ctx) {
    const std::size_t n = ctx.node.value.size();
    if (T* ga = ctx.parent_grad(0)) kt<T>().axpy(T(1), ctx.out_grad, ga, n);
    if (T* gb = ctx.parent_grad(1)) kt<T>().axpy(T(-1), ctx.out_grad, gb, n);
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check<T>(a.shape() == b.shape(), "mul: shape mismatch");
  std::vector<T> out(a.size());
  kt<T>().mul(a.data().data(), b.data().data(), out.data(), out.size());
  return make_op<T>(a.shape(), std::move(out), {a, b}, [](const Ctx<T>& ctx) {
    const std::size_t n = ctx.node.value.size();
    std::vector<T> tmp(n);
    if (T* ga = ctx.parent_grad(0)) {
      kt<T>().mul(ctx.out_grad, ctx.node.parents[1]->value.data(), tmp.data(), n);
      kt<T>().axpy(T(1), tmp.data(), ga, n);
    }
    if (T* gb = ctx.parent_grad(1)) {
      kt<T>().mul(ctx.out_grad, ctx.node.parents[0]->value.data(), tmp.data(), n);
      kt<T>().axpy(T(1), tmp.data(), gb, n);
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  std::vector<T> out(x.size());
  kt<T>().scale(c, x.data().data(), out.data(), out.size());
  return make_op<T>(x.shape(), std::move(out), {x}, [c](const Ctx<T>& ctx) {
    if (T* gx = ctx.parent_grad(0)) kt<T>().axpy(c, ctx.out_grad, gx, ctx.node.value.size());
  });
}

template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
  const std::size_t m = x.rows(), n = x.cols();
  check<T>(v.size() == n, "add_rowvec: vector length mismatch");
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < m; ++i) {
    kt<T>().add(x.data().data() + i * n, v.data().data(), out.data() + i * n, n);
  }
  return make_op<T>(x.shape(), std::move(out), {x, v}, [m, n](const Ctx<T>& ctx) {
    if (T* gx = ctx.parent_grad(0)) kt<T>().axpy(T(1), ctx.out_grad, gx, m * n);
    if (T* gv = ctx.parent_grad(1)) {
      for (std::size_t i = 0; i < m; ++i) kt<T>().axpy(T(1), ctx.out_grad + i * n, gv, n);
    }
  });
}

template <typename T>
Tensor<T> mul_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
  const std::size_t m = x.rows(), n = x.cols();
  check<T>(v.size() == n, "mul_rowvec: vector length mismatch");
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < m; ++i) {
    kt<T>().mul(x.data().data() + i * n, v.data().data(), out.data() + i * n, n);
  }
  return make_op<T>(x.shape(), std::move(out), {x, v}, [m, n](const Ctx<T>& ctx) {
    std::vector<T> tmp(n);
    if (T* gx = ctx.parent_grad(0)) {
      const T* vv = ctx.node.parents[1]->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        kt<T>().mul(ctx.out_grad + i * n, vv, tmp.data(), n);
        kt<T>().axpy(T(1), tmp.data(), gx + i * n, n);
      }
    }
    if (T* gv = ctx.parent_grad(1)) {
      const T* xv = ctx.node.parents[0]->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        kt<T>().mul(ctx.out_grad + i * n, xv + i * n, tmp.data(), n);
        kt<T>().axpy(T(1), tmp.data(), gv, n);
      }
    }
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  check<T>(a.shape().size() == 2 && b.shape().size() == 2, "matmul: operands must be 2-D");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  check<T>(b.rows() == k, "matmul: inner dimensions differ");
  std::vector<T> out(m * n, T(0));
  mm_nn(a.data().data(), m, k, b.data().data(), n, out.data());
  return make_op<T>({m, n}, std::move(out), {a, b}, [m, k, n](const Ctx<T>& ctx) {
    const T* av = ctx.node.parents[0]->value.data();
    const T* bv = ctx.node.parents[1]->value.data();
    if (T* ga = ctx.parent_grad(0)) mm_nt(ctx.out_grad, m, n, bv, k, ga);
    if (T* gb = ctx.parent_grad(1)) mm_tn(av, m, k, ctx.out_grad, n, gb);
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  check<T>(x.shape().size() == 2, "transpose: operand must be 2-D");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(m * n);
  const T* xv = x.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  }
  return make_op<T>({n, m}, std::move(out), {x}, [m, n](const Ctx<T>& ctx) {
    if (T* gx = ctx.parent_grad(0)) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) gx[i * n + j] += ctx.out_grad[j * m + i];
      }
    }
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::vector<std::size_t> idx) {
  const std::size_t n = x.cols();
  for (std::size_t r : idx) check<T>(r < x.rows(), "gather_rows: index out of range");
  std::vector<T> out(idx.size() * n);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(x.data().data() + idx[i] * n, n, out.data() + i * n);
  }
  const std::size_t m = idx.size();
  return make_op<T>({m, n}, std::move(out), {x},
                    [idx = std::move(idx), n](const Ctx<T>& ctx) {
                      if (T* gx = ctx.parent_grad(0)) {
                        for (std::size_t i = 0; i < idx.size(); ++i) {
                          kt<T>().axpy(T(1), ctx.out_grad + i * n, gx + idx[i] * n, n);
                        }
                      }
                    });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t c0, std::size_t c1) {
  const std::size_t m = x.rows(), n = x.cols();
  check<T>(c0 < c1 && c1 <= n, "slice_cols: bad column range");
  const std::size_t w = c1 - c0;
  std::vector<T> out(m * w);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(x.data().data() + i * n + c0, w, out.data() + i * w);
  }
  return make_op<T>({m, w}, std::move(out), {x}, [m, n, c0, w](const Ctx<T>& ctx) {
    if (T* gx = ctx.parent_grad(0)) {
      for (std::size_t i = 0; i < m; ++i) {
        kt<T>().axpy(T(1), ctx.out_grad + i * w, gx + i * n + c0, w);
      }
    }
  });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  check<T>(!parts.empty(), "concat_cols: empty input");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    check<T>(p.rows() == m, "concat_cols: row mismatch");
    n += p.cols();
  }
  std::vector<T> out(m * n);
  std::size_t off = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(p.data().data() + i * w, w, out.data() + i * n + off);
    }
    widths.push_back(w);
    off += w;
  }
  return make_op<T>({m, n}, std::move(out), parts,
                    [m, n, widths = std::move(widths)](const Ctx<T>& ctx) {
                      std::size_t off = 0;
                      for (std::size_t p = 0; p < widths.size(); ++p) {
                        const std::size_t w = widths[p];
                        if (T* gp = ctx.parent_grad(p)) {
                          for (std::size_t i = 0; i < m; ++i) {
                            kt<T>().axpy(T(1), ctx.out_grad + i * n + off, gp + i * w, w);
                          }
                        }
                        off += w;
                      }
                    });
}

template <typename T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows) {
  check<T>(!rows.empty(), "stack_rows: empty input");
  const std::size_t n = rows[0].size();
  for (const auto& r : rows) check<T>(r.size() == n && r.rows() == 1, "stack_rows: rows must be (1,n)");
  std::vector<T> out(rows.size() * n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(rows[i].data().data(), n, out.data() + i * n);
  }
  return make_op<T>({rows.size(), n}, std::move(out), rows, [n](const Ctx<T>& ctx) {
    for (std::size_t i = 0; i < ctx.node.parents.size(); ++i) {
      if (T* gp = ctx.parent_grad(i)) kt<T>().axpy(T(1), ctx.out_grad + i * n, gp, n);
    }
  });
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(n, T(0));
  for (std::size_t i = 0; i < m; ++i) kt<T>().axpy(T(1), x.data().data() + i * n, out.data(), n);
  const T inv = T(1) / static_cast<T>(m);
  kt<T>().scale(inv, out.data(), out.data(), n);
  return make_op<T>({1, n}, std::move(out), {x}, [m, n, inv](const Ctx<T>& ctx) {
    if (T* gx = ctx.parent_grad(0)) {
      for (std::size_t i = 0; i < m; ++i) kt<T>().axpy(inv, ctx.out_grad, gx + i * n, n);
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, T eps) {
  const std::size_t m = x.rows(), n = x.cols();
  check<T>(n > 0, "layer_norm: empty rows");
  std::vector<T> out(m * n);
  std::vector<T> inv_std(m);
  const T* xv = x.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = xv + i * n;
    T* orow = out.data() + i * n;
    const T mean = kt<T>().sum(row, n) / static_cast<T>(n);
    for (std::size_t j = 0; j < n; ++j) orow[j] = row[j] - mean;
    const T var = kt<T>().dot(orow, orow, n) / static_cast<T>(n);
    const T s = T(1) / std::sqrt(var + eps);
    inv_std[i] = s;
    kt<T>().scale(s, orow, orow, n);
  }
  return make_op<T>(x.shape(), std::move(out), {x},
                    [m, n, inv_std = std::move(inv_std)](const Ctx<T>& ctx) {
                      T* gx = ctx.parent_grad(0);
                      if (gx == nullptr) return;
                      const T* y = ctx.node.value.data();
                      const T invn = T(1) / static_cast<T>(n);
                      std::vector<T> tmp(n);
                      for (std::size_t i = 0; i < m; ++i) {
                        const T* g = ctx.out_grad + i * n;
                        const T* yr = y + i * n;
                        const T gmean = kt<T>().sum(g, n) * invn;
                        const T gymean = kt<T>().dot(g, yr, n) * invn;
                        for (std::size_t j = 0; j < n; ++j) {
                          tmp[j] = g[j] - gmean - yr[j] * gymean;
                        }
                        kt<T>().axpy(inv_std[i], tmp.data(), gx + i * n, n);
                      }
                    });
}

namespace {

// Shared softmax core; prefix[i] = number of active leading columns in row i.
// Inactive entries are exactly zero in the output and ignored in backward.
template <typename T>
Tensor<T> softmax_prefix(const Tensor<T>& x, std::vector<std::size_t> prefix) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(m * n, T(0));
  const T* xv = x.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t w = prefix[i];
    const T* row = xv + i * n;
    T* orow = out.data() + i * n;
    const T mx = kt<T>().max(row, w);
    for (std::size_t j = 0; j < w; ++j) orow[j] = std::exp(row[j] - mx);
    const T denom = kt<T>().sum(orow, w);
    kt<T>().scale(T(1) / denom, orow, orow, w);
  }
  return make_op<T>(x.shape(), std::move(out), {x},
                    [m, n, prefix = std::move(prefix)](const Ctx<T>& ctx) {
                      T* gx = ctx.parent_grad(0);
                      if (gx == nullptr) return;
                      const T* y = ctx.node.value.data();
                      for (std::size_t i = 0; i < m; ++i) {
                        const std::size_t w = prefix[i];
                        const T* g = ctx.out_grad + i * n;
                        const T* yr = y + i * n;
                        const T gy = kt<T>().dot(g, yr, w);
                        for (std::size_t j = 0; j < w; ++j) {
                          gx[i * n + j] += yr[j] * (g[j] - gy);
                        }
                      }
                    });
}

}  // namespace

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  return softmax_prefix(x, std::vector<std::size_t>(x.rows(), x.cols()));
}

template <typename T>
Tensor<T> softmax_causal(const Tensor<T>& x) {
  check<T>(x.rows() == x.cols(), "softmax_causal: input must be square");
  std::vector<std::size_t> prefix(x.rows());
  for (std::size_t i = 0; i < prefix.size(); ++i) prefix[i] = i + 1;
  return softmax_prefix(x, std::move(prefix));
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  const std::size_t n = x.size();
  std::vector<T> out(n);
  const T* xv = x.data().data();
  constexpr T inv_sqrt2 = T(0.7071067811865475244);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] * inv_sqrt2));
  }
  return make_op<T>(x.shape(), std::move(out), {x}, [n](const Ctx<T>& ctx) {
    T* gx = ctx.parent_grad(0);
    if (gx == nullptr) return;
    const T* xv = ctx.node.parents[0]->value.data();
    constexpr T inv_sqrt2 = T(0.7071067811865475244);
    const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    for (std::size_t i = 0; i < n; ++i) {
      const T cdf = T(0.5) * (T(1) + std::erf(xv[i] * inv_sqrt2));
      const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * xv[i] * xv[i]);
      gx[i] += ctx.out_grad[i] * (cdf + xv[i] * pdf);
    }
  });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  const T s = kt<T>().sum(x.data().data(), x.size());
  return make_op<T>({1}, {s}, {x}, [](const Ctx<T>& ctx) {
    if (T* gx = ctx.parent_grad(0)) {
      const T g = ctx.out_grad[0];
      for (std::size_t i = 0; i < ctx.node.parents[0]->value.size(); ++i) gx[i] += g;
    }
  });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  const T inv = T(1) / static_cast<T>(x.size());
  const T s = kt<T>().sum(x.data().data(), x.size()) * inv;
  return make_op<T>({1}, {s}, {x}, [inv](const Ctx<T>& ctx) {
    if (T* gx = ctx.parent_grad(0)) {
      const T g = ctx.out_grad[0] * inv;
      for (std::size_t i = 0; i < ctx.node.parents[0]->value.size(); ++i) gx[i] += g;
    }
  });
}

template <typename T>
Tensor<T> smooth_l1(const Tensor<T>& pred, const Tensor<T>& target, T beta) {
  check<T>(pred.shape() == target.shape(), "smooth_l1: shape mismatch");
  check<T>(beta > T(0), "smooth_l1: beta must be positive");
  const std::size_t n = pred.size();
  const T* pv = pred.data().data();
  const T* tv = target.data().data();
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T d = pv[i] - tv[i];
    const T ad = std::abs(d);
    acc += ad < beta ? T(0.5) * d * d / beta : ad - T(0.5) * beta;
  }
  const T inv = T(1) / static_cast<T>(n);
  return make_op<T>({1}, {acc * inv}, {pred, target}, [n, beta, inv](const Ctx<T>& ctx) {
    const T* pv = ctx.node.parents[0]->value.data();
    const T* tv = ctx.node.parents[1]->value.data();
    const T g = ctx.out_grad[0] * inv;
    T* gp = ctx.parent_grad(0);
    T* gt = ctx.parent_grad(1);
    for (std::size_t i = 0; i < n; ++i) {
      const T d = pv[i] - tv[i];
      const T dd = std::abs(d) < beta ? d / beta : (d > T(0) ? T(1) : T(-1));
      if (gp != nullptr) gp[i] += g * dd;
      if (gt != nullptr) gt[i] -= g * dd;
    }
  });
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  check<T>(pred.shape() == target.shape(), "l1_loss: shape mismatch");
  const std::size_t n = pred.size();
  const T* pv = pred.data().data();
  const T* tv = target.data().data();
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(pv[i] - tv[i]);
  const T inv = T(1) / static_cast<T>(n);
  return make_op<T>({1}, {acc * inv}, {pred, target}, [n, inv](const Ctx<T>& ctx) {
    const T* pv = ctx.node.parents[0]->value.data();
    const T* tv = ctx.node.parents[1]->value.data();
    const T g = ctx.out_grad[0] * inv;
    T* gp = ctx.parent_grad(0);
    T* gt = ctx.parent_grad(1);
    for (std::size_t i = 0; i < n; ++i) {
      const T s = pv[i] - tv[i] > T(0) ? T(1) : (pv[i] - tv[i] < T(0) ? T(-1) : T(0));
      if (gp != nullptr) gp[i] += g * s;
      if (gt != nullptr) gt[i] -= g * s;
    }
  });
}

template <typename T>
Tensor<T> cross_entropy_logits(const Tensor<T>& logits, const std::vector<std::size_t>& target) {
  const std::size_t m = logits.rows(), n = logits.cols();
  check<T>(target.size() == m, "cross_entropy_logits: target length mismatch");
  for (std::size_t t : target) check<T>(t < n, "cross_entropy_logits: class out of range");
  const T* xv = logits.data().data();
  std::vector<T> probs(m * n);
  T acc = T(0);
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = xv + i * n;
    T* prow = probs.data() + i * n;
    const T mx = kt<T>().max(row, n);
    for (std::size_t j = 0; j < n; ++j) prow[j] = std::exp(row[j] - mx);
    const T denom = kt<T>().sum(prow, n);
    kt<T>().scale(T(1) / denom, prow, prow, n);
    acc += std::log(denom) + mx - row[target[i]];
  }
  const T inv = T(1) / static_cast<T>(m);
  return make_op<T>({1}, {acc * inv}, {logits},
                    [m, n, inv, target, probs = std::move(probs)](const Ctx<T>& ctx) {
                      T* gx = ctx.parent_grad(0);
                      if (gx == nullptr) return;
                      const T g = ctx.out_grad[0] * inv;
                      for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t j = 0; j < n; ++j) {
                          gx[i * n + j] += g * probs[i * n + j];
                        }
                        gx[i * n + target[i]] -= g;
                      }
                    });
}

template <typename T>
Tensor<T> bce_logits(const Tensor<T>& logits, const std::vector<T>& target) {
  const std::size_t n = logits.size();
  check<T>(target.size() == n, "bce_logits: target length mismatch");
  const T* xv = logits.data().data();
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    // max(x,0) - x*y + log(1+exp(-|x|)), stable for large |x|
    acc += std::max(xv[i], T(0)) - xv[i] * target[i] + std::log1p(std::exp(-std::abs(xv[i])));
  }
  const T inv = T(1) / static_cast<T>(n);
  return make_op<T>({1}, {acc * inv}, {logits}, [n, inv, target](const Ctx<T>& ctx) {
    T* gx = ctx.parent_grad(0);
    if (gx == nullptr) return;
    const T* xv = ctx.node.parents[0]->value.data();
    const T g = ctx.out_grad[0] * inv;
    for (std::size_t i = 0; i < n; ++i) {
      const T sig = T(1) / (T(1) + std::exp(-xv[i]));
      gx[i] += g * (sig - target[i]);
    }
  });
}

#define GW_INSTANTIATE_OPS(T)                                                               \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                         \
  template Tensor<T> add_rowvec<T>(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> mul_rowvec<T>(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> transpose<T>(const Tensor<T>&);                                        \
  template Tensor<T> gather_rows<T>(const Tensor<T>&, std::vector<std::size_t>);            \
  template Tensor<T> slice_cols<T>(const Tensor<T>&, std::size_t, std::size_t);             \
  template Tensor<T> concat_cols<T>(const std::vector<Tensor<T>>&);                         \
  template Tensor<T> stack_rows<T>(const std::vector<Tensor<T>>&);                          \
  template Tensor<T> mean_rows<T>(const Tensor<T>&);                                        \
  template Tensor<T> layer_norm<T>(const Tensor<T>&, T);                                    \
  template Tensor<T> softmax_rows<T>(const Tensor<T>&);                                     \
  template Tensor<T> softmax_causal<T>(const Tensor<T>&);                                   \
  template Tensor<T> gelu<T>(const Tensor<T>&);                                             \
  template Tensor<T> sum_all<T>(const Tensor<T>&);                                          \
  template Tensor<T> mean_all<T>(const Tensor<T>&);                                         \
  template Tensor<T> smooth_l1<T>(const Tensor<T>&, const Tensor<T>&, T);                   \
  template Tensor<T> l1_loss<T>(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> cross_entropy_logits<T>(const Tensor<T>&,                              \
                                             const std::vector<std::size_t>&);             \
  template Tensor<T> bce_logits<T>(const Tensor<T>&, const std::vector<T>&);

GW_INSTANTIATE_OPS(float)
GW_INSTANTIATE_OPS(double)

#undef GW_INSTANTIATE_OPS

}  // namespace gazeworld::ops
