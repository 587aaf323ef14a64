#pragma once

// Tensor op registry. Every op computes its forward value eagerly and, when
// recording, attaches a backward rule that accumulates into its inputs.
//
// Broadcasting is restricted to leading-axis expansion: the smaller operand's
// shape must equal the trailing dimensions of the larger one.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

#include "rgk/numerics/tensor.hpp"

namespace rgk {

namespace detail {

inline bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

[[noreturn]] inline void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(
      detail::concat(op, ": shape mismatch ", shape_str(a), " vs ", shape_str(b)));
}

inline std::size_t checked_axis(const char* op, const Tensor& x, int axis) {
  int r = static_cast<int>(x.rank());
  int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r)
    throw std::invalid_argument(
        detail::concat(op, ": axis ", axis, " out of range for shape ", shape_str(x.shape())));
  return static_cast<std::size_t>(a);
}

// (outer, axis length, inner) decomposition of a shape around an axis.
struct AxisView {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisView axis_view(const Shape& s, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

inline Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape r;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) r.push_back(s[i]);
  if (r.empty()) r.push_back(1);
  return r;
}

// Elementwise binary op with suffix broadcasting. `df` returns the partial
// derivatives (d/da, d/db) at (a, b).
template <typename F, typename DF>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, DF df) {
  const Shape* out_shape = nullptr;
  if (is_suffix(b.shape(), a.shape()))
    out_shape = &a.shape();
  else if (is_suffix(a.shape(), b.shape()))
    out_shape = &b.shape();
  else
    shape_error(op, a.shape(), b.shape());
  std::size_t n = shape_numel(*out_shape);
  std::size_t na = a.numel(), nb = b.numel();
  std::vector<double> out(n);
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(pa[i % na], pb[i % nb]);
  return make_result(op, *out_shape, std::move(out), {&a, &b}, [n, na, nb, df](Node& self) {
    const double* va = self.inputs[0]->value.data();
    const double* vb = self.inputs[1]->value.data();
    double* ga = input_grad(self, 0);
    double* gb = input_grad(self, 1);
    const double* g = self.grad.data();
    for (std::size_t i = 0; i < n; ++i) {
      auto [da, db] = df(va[i % na], vb[i % nb]);
      if (ga) ga[i % na] += g[i] * da;
      if (gb) gb[i % nb] += g[i] * db;
    }
  });
}

// Elementwise unary op; `df(x, y)` is the derivative given input and output.
template <typename F, typename DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df) {
  std::size_t n = x.numel();
  std::vector<double> out(n);
  const double* px = x.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(px[i]);
  return make_result(op, x.shape(), std::move(out), {&x}, [n, df](Node& self) {
    const double* vx = self.inputs[0]->value.data();
    double* gx = input_grad(self, 0);
    if (!gx) return;
    const double* g = self.grad.data();
    const double* y = self.value.data();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * df(vx[i], y[i]);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return std::pair{1.0, 1.0}; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return std::pair{1.0, -1.0}; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y) { return std::pair{y, x}; });
}

inline Tensor scale(const Tensor& x, double s) {
  return detail::unary(
      "scale", x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& x, double s) {
  return detail::unary(
      "add_scalar", x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

inline Tensor neg(const Tensor& x) { return scale(x, -1.0); }

inline Tensor exp(const Tensor& x) {
  return detail::unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Tensor square(const Tensor& x) {
  return detail::unary(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

inline Tensor abs(const Tensor& x) {
  return detail::unary(
      "abs", x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

// Gradient passes inside [lo, hi] and is zero where the value was clipped.
inline Tensor clamp(const Tensor& x, double lo, double hi) {
  return detail::unary(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v < lo || v > hi) ? 0.0 : 1.0; });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary(
      "relu", x, [](double v) { return v > 0 ? v : 0.0; },
      [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
inline Tensor gelu(const Tensor& x) {
  constexpr double c = 0.7978845608028654;
  constexpr double k = 0.044715;
  return detail::unary(
      "gelu", x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + k * v * v * v))); },
      [](double v, double) {
        double t = std::tanh(c * (v + k * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * k * v * v);
      });
}

// ---------------------------------------------------------------------------
// Linear algebra and layout

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    detail::shape_error("matmul", a.shape(), b.shape());
  std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return detail::make_result("matmul", {m, n}, std::move(out), {&a, &b}, [m, k, n](Node& self) {
    const double* va = self.inputs[0]->value.data();
    const double* vb = self.inputs[1]->value.data();
    const double* g = self.grad.data();
    if (double* ga = detail::input_grad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          const double* grow = g + i * n;
          const double* brow = vb + p * n;
          for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
          ga[i * k + p] += s;
        }
    }
    if (double* gb = detail::input_grad(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double av = va[i * k + p];
          if (av == 0.0) continue;
          const double* grow = g + i * n;
          double* gbrow = gb + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
    }
  });
}

inline Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw std::invalid_argument("transpose: expected rank 2, got " + shape_str(x.shape()));
  std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  return detail::make_result("transpose", {c, r}, std::move(out), {&x}, [r, c](Node& self) {
    double* gx = detail::input_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += self.grad[j * r + i];
  });
}

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) detail::shape_error("reshape", x.shape(), shape);
  return detail::make_result("reshape", std::move(shape), x.values(), {&x}, [](Node& self) {
    double* gx = detail::input_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  std::size_t ax = detail::checked_axis("concat", parts[0], axis);
  Shape shape = parts[0].shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size()) detail::shape_error("concat", shape, p.shape());
    for (std::size_t i = 0; i < shape.size(); ++i)
      if (i != ax && p.dim(i) != shape[i]) detail::shape_error("concat", shape, p.shape());
    total += p.dim(ax);
  }
  shape[ax] = total;
  auto v = detail::axis_view(shape, ax);
  std::vector<std::size_t> lens, offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    lens.push_back(p.dim(ax));
    offsets.push_back(off);
    off += p.dim(ax);
  }
  std::vector<double> out(shape_numel(shape));
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double* src = parts[k].data();
    std::size_t block = lens[k] * v.inner;
    for (std::size_t o = 0; o < v.outer; ++o)
      std::copy(src + o * block, src + (o + 1) * block,
                out.begin() + static_cast<std::ptrdiff_t>(o * total * v.inner + offsets[k] * v.inner));
  }
  return detail::make_result_n("concat", shape, std::move(out), parts,
                               [v, total, lens, offsets](Node& self) {
    for (std::size_t k = 0; k < lens.size(); ++k) {
      double* gx = detail::input_grad(self, k);
      if (!gx) continue;
      std::size_t block = lens[k] * v.inner;
      for (std::size_t o = 0; o < v.outer; ++o) {
        const double* g = self.grad.data() + o * total * v.inner + offsets[k] * v.inner;
        for (std::size_t i = 0; i < block; ++i) gx[o * block + i] += g[i];
      }
    }
  });
}

// Contiguous range [start, start+len) along an axis.
inline Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t len) {
  std::size_t ax = detail::checked_axis("slice", x, axis);
  if (len == 0 || start + len > x.dim(ax))
    throw std::invalid_argument(detail::concat("slice: range [", start, ",", start + len,
                                               ") out of bounds for ", shape_str(x.shape())));
  Shape shape = x.shape();
  auto v = detail::axis_view(shape, ax);
  shape[ax] = len;
  std::vector<double> out(shape_numel(shape));
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy(x.data() + (o * v.len + start) * v.inner, x.data() + (o * v.len + start + len) * v.inner,
              out.begin() + static_cast<std::ptrdiff_t>(o * len * v.inner));
  return detail::make_result("slice", shape, std::move(out), {&x}, [v, start, len](Node& self) {
    double* gx = detail::input_grad(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < len * v.inner; ++i)
        gx[(o * v.len + start) * v.inner + i] += self.grad[o * len * v.inner + i];
  });
}

// Rows of x (first axis) selected by index; repeated indices allowed.
inline Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  if (index.empty()) throw std::invalid_argument("gather_rows: empty index");
  std::size_t rows = x.dim(0);
  std::size_t width = x.numel() / rows;
  for (auto i : index)
    if (i >= rows)
      throw std::invalid_argument(detail::concat("gather_rows: index ", i, " out of range for ",
                                                 shape_str(x.shape())));
  Shape shape = x.shape();
  shape[0] = index.size();
  std::vector<double> out(index.size() * width);
  for (std::size_t r = 0; r < index.size(); ++r)
    std::copy(x.data() + index[r] * width, x.data() + (index[r] + 1) * width,
              out.begin() + static_cast<std::ptrdiff_t>(r * width));
  std::vector<std::size_t> idx(index.begin(), index.end());
  return detail::make_result("gather_rows", shape, std::move(out), {&x}, [idx, width](Node& self) {
    double* gx = detail::input_grad(self, 0);
    if (!gx) return;
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < width; ++c) gx[idx[r] * width + c] += self.grad[r * width + c];
  });
}

// out[s] = column-wise max over rows i with segment[i] == s; zero rows for
// empty segments. Ties go to the smallest row index.
inline Tensor segment_max(const Tensor& x, std::span<const std::size_t> segment, std::size_t segments) {
  if (x.rank() != 2 || segment.size() != x.dim(0))
    throw std::invalid_argument(detail::concat("segment_max: ", segment.size(), " segment ids for ",
                                               shape_str(x.shape())));
  std::size_t w = x.dim(1);
  std::vector<double> out(segments * w, 0.0);
  std::vector<std::ptrdiff_t> arg(segments * w, -1);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    std::size_t s = segment[i];
    if (s >= segments) throw std::invalid_argument("segment_max: segment id out of range");
    for (std::size_t c = 0; c < w; ++c) {
      double v = x[i * w + c];
      auto& a = arg[s * w + c];
      if (a < 0 || v > out[s * w + c]) {
        out[s * w + c] = v;
        a = static_cast<std::ptrdiff_t>(i);
      }
    }
  }
  return detail::make_result("segment_max", {segments, w}, std::move(out), {&x}, [arg, w](Node& self) {
    double* gx = detail::input_grad(self, 0);
    if (!gx) return;
    for (std::size_t k = 0; k < arg.size(); ++k)
      if (arg[k] >= 0) gx[static_cast<std::size_t>(arg[k]) * w + k % w] += self.grad[k];
  });
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return detail::make_result("sum", {1}, {s}, {&x}, [](Node& self) {
    double* gx = detail::input_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < self.inputs[0]->value.size(); ++i) gx[i] += self.grad[0];
  });
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

inline Tensor sum_axis(const Tensor& x, int axis) {
  std::size_t ax = detail::checked_axis("sum_axis", x, axis);
  auto v = detail::axis_view(x.shape(), ax);
  std::vector<double> out(v.outer * v.inner, 0.0);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t l = 0; l < v.len; ++l)
      for (std::size_t i = 0; i < v.inner; ++i)
        out[o * v.inner + i] += x[(o * v.len + l) * v.inner + i];
  return detail::make_result("sum_axis", detail::drop_axis(x.shape(), ax), std::move(out), {&x},
                             [v](Node& self) {
    double* gx = detail::input_grad(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t l = 0; l < v.len; ++l)
        for (std::size_t i = 0; i < v.inner; ++i)
          gx[(o * v.len + l) * v.inner + i] += self.grad[o * v.inner + i];
  });
}

inline Tensor mean_axis(const Tensor& x, int axis) {
  std::size_t ax = detail::checked_axis("mean_axis", x, axis);
  return scale(sum_axis(x, axis), 1.0 / static_cast<double>(x.dim(ax)));
}

namespace detail {

template <typename Better>
Tensor arg_reduce(const char* op, const Tensor& x, int axis, Better better) {
  std::size_t ax = checked_axis(op, x, axis);
  auto v = axis_view(x.shape(), ax);
  std::vector<double> out(v.outer * v.inner);
  std::vector<std::size_t> arg(v.outer * v.inner);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      std::size_t best = (o * v.len) * v.inner + i;
      for (std::size_t l = 1; l < v.len; ++l) {
        std::size_t k = (o * v.len + l) * v.inner + i;
        if (better(x[k], x[best])) best = k;
      }
      out[o * v.inner + i] = x[best];
      arg[o * v.inner + i] = best;
    }
  return make_result(op, drop_axis(x.shape(), ax), std::move(out), {&x}, [arg](Node& self) {
    double* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t k = 0; k < arg.size(); ++k) gx[arg[k]] += self.grad[k];
  });
}

}  // namespace detail

// Max along an axis; gradient routed to the first maximal entry.
inline Tensor max_axis(const Tensor& x, int axis) {
  return detail::arg_reduce("max_axis", x, axis, [](double a, double b) { return a > b; });
}

inline Tensor min_axis(const Tensor& x, int axis) {
  return detail::arg_reduce("min_axis", x, axis, [](double a, double b) { return a < b; });
}

// ---------------------------------------------------------------------------
// Normalization and attention primitives

inline Tensor softmax(const Tensor& x, int axis) {
  std::size_t ax = detail::checked_axis("softmax", x, axis);
  auto v = detail::axis_view(x.shape(), ax);
  std::vector<double> out(x.numel());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      auto at = [&](std::size_t l) { return (o * v.len + l) * v.inner + i; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < v.len; ++l) mx = std::max(mx, x[at(l)]);
      double z = 0.0;
      for (std::size_t l = 0; l < v.len; ++l) z += (out[at(l)] = std::exp(x[at(l)] - mx));
      for (std::size_t l = 0; l < v.len; ++l) out[at(l)] /= z;
    }
  return detail::make_result("softmax", x.shape(), std::move(out), {&x}, [v](Node& self) {
    double* gx = detail::input_grad(self, 0);
    if (!gx) return;
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < v.inner; ++i) {
        auto at = [&](std::size_t l) { return (o * v.len + l) * v.inner + i; };
        double dot = 0.0;
        for (std::size_t l = 0; l < v.len; ++l) dot += g[at(l)] * y[at(l)];
        for (std::size_t l = 0; l < v.len; ++l) gx[at(l)] += y[at(l)] * (g[at(l)] - dot);
      }
  });
}

// Normalizes the last axis, then applies gain and bias (both of that length).
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5) {
  std::size_t n = x.shape().back();
  if (gain.numel() != n || bias.numel() != n) detail::shape_error("layer_norm", x.shape(), gain.shape());
  if (!(eps > 0)) throw std::invalid_argument("layer_norm: eps must be positive");
  std::size_t rows = x.numel() / n;
  std::vector<double> out(x.numel()), xhat(x.numel()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[r * n + j] = (row[j] - mu) * inv_std[r];
      out[r * n + j] = xhat[r * n + j] * gain[j] + bias[j];
    }
  }
  return detail::make_result("layer_norm", x.shape(), std::move(out), {&x, &gain, &bias},
                             [n, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
    const double* gv = self.inputs[1]->value.data();
    double* gx = detail::input_grad(self, 0);
    double* ggain = detail::input_grad(self, 1);
    double* gbias = detail::input_grad(self, 2);
    const double* g = self.grad.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gr = g + r * n;
      const double* xh = xhat.data() + r * n;
      if (ggain || gbias)
        for (std::size_t j = 0; j < n; ++j) {
          if (ggain) ggain[j] += gr[j] * xh[j];
          if (gbias) gbias[j] += gr[j];
        }
      if (!gx) continue;
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double d = gr[j] * gv[j];
        m1 += d;
        m2 += d * xh[j];
      }
      m1 /= static_cast<double>(n);
      m2 /= static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j)
        gx[r * n + j] += inv_std[r] * (gr[j] * gv[j] - m1 - xh[j] * m2);
    }
  });
}

// ---------------------------------------------------------------------------
// Distances

// mean |a - b| over all entries.
inline Tensor l1_distance(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) detail::shape_error("l1_distance", a.shape(), b.shape());
  return mean(abs(sub(a, b)));
}

// sum (a - b)^2 over all entries.
inline Tensor sq_l2_distance(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) detail::shape_error("sq_l2_distance", a.shape(), b.shape());
  return sum(square(sub(a, b)));
}

// D[i][j] = ||a_i - b_j||^2 for row sets a (n x c) and b (m x c).
inline Tensor pairwise_sq_dist(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    detail::shape_error("pairwise_sq_dist", a.shape(), b.shape());
  std::size_t n = a.dim(0), m = b.dim(0), c = a.dim(1);
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        double d = a[i * c + k] - b[j * c + k];
        s += d * d;
      }
      out[i * m + j] = s;
    }
  return detail::make_result("pairwise_sq_dist", {n, m}, std::move(out), {&a, &b}, [n, m, c](Node& self) {
    const double* va = self.inputs[0]->value.data();
    const double* vb = self.inputs[1]->value.data();
    double* ga = detail::input_grad(self, 0);
    double* gb = detail::input_grad(self, 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double g = self.grad[i * m + j];
        if (g == 0.0) continue;
        for (std::size_t k = 0; k < c; ++k) {
          double d = 2.0 * g * (va[i * c + k] - vb[j * c + k]);
          if (ga) ga[i * c + k] += d;
          if (gb) gb[j * c + k] -= d;
        }
      }
  });
}

// Symmetric mean-of-min squared distance between point sets, averaged over a
// leading batch axis. Accepts (P x 3, Q x 3) or (B x P x 3, B x Q x 3).
// Nearest-neighbour ties resolve to the smallest index.
inline Tensor chamfer(const Tensor& a, const Tensor& b) {
  bool batched = a.rank() == 3;
  if (a.rank() != b.rank() || (a.rank() != 2 && a.rank() != 3) || a.shape().back() != 3 ||
      b.shape().back() != 3 || (batched && a.dim(0) != b.dim(0)))
    detail::shape_error("chamfer", a.shape(), b.shape());
  std::size_t B = batched ? a.dim(0) : 1;
  std::size_t P = a.dim(a.rank() - 2), Q = b.dim(b.rank() - 2);
  std::vector<std::size_t> nn_ab(B * P), nn_ba(B * Q);
  double total = 0.0;
  for (std::size_t s = 0; s < B; ++s) {
    const double* pa = a.data() + s * P * 3;
    const double* pb = b.data() + s * Q * 3;
    auto d2 = [](const double* x, const double* y) {
      double dx = x[0] - y[0], dy = x[1] - y[1], dz = x[2] - y[2];
      return dx * dx + dy * dy + dz * dz;
    };
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < Q; ++j) {
        double d = d2(pa + 3 * i, pb + 3 * j);
        if (d < best) best = d, nn_ab[s * P + i] = j;
      }
      sa += best;
    }
    for (std::size_t j = 0; j < Q; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < P; ++i) {
        double d = d2(pb + 3 * j, pa + 3 * i);
        if (d < best) best = d, nn_ba[s * Q + j] = i;
      }
      sb += best;
    }
    total += sa / static_cast<double>(P) + sb / static_cast<double>(Q);
  }
  total /= static_cast<double>(B);
  return detail::make_result("chamfer", {1}, {total}, {&a, &b},
                             [B, P, Q, nn_ab = std::move(nn_ab), nn_ba = std::move(nn_ba)](Node& self) {
    const double* va = self.inputs[0]->value.data();
    const double* vb = self.inputs[1]->value.data();
    double* ga = detail::input_grad(self, 0);
    double* gb = detail::input_grad(self, 1);
    double g = self.grad[0] / static_cast<double>(B);
    for (std::size_t s = 0; s < B; ++s) {
      double wa = 2.0 * g / static_cast<double>(P), wb = 2.0 * g / static_cast<double>(Q);
      for (std::size_t i = 0; i < P; ++i) {
        std::size_t j = nn_ab[s * P + i];
        for (std::size_t k = 0; k < 3; ++k) {
          double d = va[(s * P + i) * 3 + k] - vb[(s * Q + j) * 3 + k];
          if (ga) ga[(s * P + i) * 3 + k] += wa * d;
          if (gb) gb[(s * Q + j) * 3 + k] -= wa * d;
        }
      }
      for (std::size_t j = 0; j < Q; ++j) {
        std::size_t i = nn_ba[s * Q + j];
        for (std::size_t k = 0; k < 3; ++k) {
          double d = vb[(s * Q + j) * 3 + k] - va[(s * P + i) * 3 + k];
          if (gb) gb[(s * Q + j) * 3 + k] += wb * d;
          if (ga) ga[(s * P + i) * 3 + k] -= wb * d;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Rotation and skinning kernels used by the hand layer

// Rows of an (n x 3) tensor with norm above `max_norm` are rescaled to it.
inline Tensor clamp_row_norm(const Tensor& x, double max_norm) {
  if (x.rank() != 2 || x.dim(1) != 3) throw std::invalid_argument("clamp_row_norm: expected n x 3, got " + shape_str(x.shape()));
  std::size_t n = x.dim(0);
  std::vector<double> out(x.values());
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = x.data() + 3 * i;
    norms[i] = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
    if (norms[i] > max_norm)
      for (std::size_t k = 0; k < 3; ++k) out[3 * i + k] = r[k] * max_norm / norms[i];
  }
  return detail::make_result("clamp_row_norm", x.shape(), std::move(out), {&x},
                             [n, max_norm, norms = std::move(norms)](Node& self) {
    double* gx = detail::input_grad(self, 0);
    if (!gx) return;
    const double* v = self.inputs[0]->value.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double* g = self.grad.data() + 3 * i;
      if (norms[i] <= max_norm) {
        for (std::size_t k = 0; k < 3; ++k) gx[3 * i + k] += g[k];
        continue;
      }
      // d(m x / |x|) = m/|x| (I - u u^T)
      double s = max_norm / norms[i];
      double u[3] = {v[3 * i] / norms[i], v[3 * i + 1] / norms[i], v[3 * i + 2] / norms[i]};
      double gu = g[0] * u[0] + g[1] * u[1] + g[2] * u[2];
      for (std::size_t k = 0; k < 3; ++k) gx[3 * i + k] += s * (g[k] - gu * u[k]);
    }
  });
}

// Axis-angle rows (n x 3) to rotation matrices (n x 3 x 3):
// R = I + a(t) [r]x + b(t) [r]x^2 with a = sin t / t, b = (1 - cos t) / t^2.
inline Tensor rodrigues(const Tensor& r) {
  if (r.rank() != 2 || r.dim(1) != 3) throw std::invalid_argument("rodrigues: expected n x 3, got " + shape_str(r.shape()));
  std::size_t n = r.dim(0);
  struct Coef {
    double a, b, da, db;  // da = a'(t)/t, db = b'(t)/t
  };
  auto coef = [](double t2) {
    Coef c{};
    if (t2 < 1e-8) {
      c.a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
      c.b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
      c.da = -1.0 / 3.0 + t2 / 30.0;
      c.db = -1.0 / 12.0 + t2 / 180.0;
    } else {
      double t = std::sqrt(t2), s = std::sin(t), co = std::cos(t);
      c.a = s / t;
      c.b = (1.0 - co) / t2;
      c.da = (t * co - s) / (t2 * t);
      c.db = (t * s - 2.0 * (1.0 - co)) / (t2 * t2);
    }
    return c;
  };
  auto skew = [](const double* v, double* K) {
    K[0] = 0; K[1] = -v[2]; K[2] = v[1];
    K[3] = v[2]; K[4] = 0; K[5] = -v[0];
    K[6] = -v[1]; K[7] = v[0]; K[8] = 0;
  };
  auto mm3 = [](const double* A, const double* B, double* C) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) C[3 * i + j] = A[3 * i] * B[j] + A[3 * i + 1] * B[3 + j] + A[3 * i + 2] * B[6 + j];
  };
  std::vector<double> out(n * 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double* v = r.data() + 3 * i;
    Coef c = coef(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    double K[9], K2[9];
    skew(v, K);
    mm3(K, K, K2);
    for (int k = 0; k < 9; ++k) out[9 * i + k] = (k % 4 == 0 ? 1.0 : 0.0) + c.a * K[k] + c.b * K2[k];
  }
  return detail::make_result("rodrigues", {n, 3, 3}, std::move(out), {&r}, [n, coef, skew, mm3](Node& self) {
    double* gr = detail::input_grad(self, 0);
    if (!gr) return;
    const double* vr = self.inputs[0]->value.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double* v = vr + 3 * i;
      const double* g = self.grad.data() + 9 * i;
      Coef c = coef(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      double K[9], K2[9];
      skew(v, K);
      mm3(K, K, K2);
      double gK = 0.0, gK2 = 0.0;
      for (int k = 0; k < 9; ++k) gK += g[k] * K[k], gK2 += g[k] * K2[k];
      for (int d = 0; d < 3; ++d) {
        double e[3] = {0, 0, 0};
        e[d] = 1.0;
        double E[9], EK[9], KE[9];
        skew(e, E);
        mm3(E, K, EK);
        mm3(K, E, KE);
        double s = c.da * v[d] * gK + c.db * v[d] * gK2;
        for (int k = 0; k < 9; ++k) s += g[k] * (c.a * E[k] + c.b * (EK[k] + KE[k]));
        gr[3 * i + d] += s;
      }
    }
  });
}

// Linear blend skinning: out_i = sum_j W_ij (R_j p_i + t_j) for rotations
// (J x 3 x 3) and translations (J x 3). Weights (V x J) and rest points
// (V x 3) are constants.
inline Tensor blend_skin(std::span<const double> weights, std::span<const double> rest, const Tensor& rot,
                         const Tensor& trans) {
  std::size_t J = rot.dim(0);
  if (rot.rank() != 3 || rot.dim(1) != 3 || rot.dim(2) != 3 || trans.shape() != Shape{J, 3})
    detail::shape_error("blend_skin", rot.shape(), trans.shape());
  std::size_t V = rest.size() / 3;
  if (weights.size() != V * J) throw std::invalid_argument("blend_skin: weight matrix size mismatch");
  std::vector<double> out(V * 3, 0.0);
  const double* R = rot.data();
  const double* T = trans.data();
  for (std::size_t i = 0; i < V; ++i) {
    const double* p = rest.data() + 3 * i;
    for (std::size_t j = 0; j < J; ++j) {
      double w = weights[i * J + j];
      if (w == 0.0) continue;
      const double* Rj = R + 9 * j;
      for (int a = 0; a < 3; ++a)
        out[3 * i + a] += w * (Rj[3 * a] * p[0] + Rj[3 * a + 1] * p[1] + Rj[3 * a + 2] * p[2] + T[3 * j + a]);
    }
  }
  std::vector<double> W(weights.begin(), weights.end()), P(rest.begin(), rest.end());
  return detail::make_result("blend_skin", {V, 3}, std::move(out), {&rot, &trans},
                             [V, J, W = std::move(W), P = std::move(P)](Node& self) {
    double* gR = detail::input_grad(self, 0);
    double* gT = detail::input_grad(self, 1);
    for (std::size_t i = 0; i < V; ++i) {
      const double* g = self.grad.data() + 3 * i;
      const double* p = P.data() + 3 * i;
      for (std::size_t j = 0; j < J; ++j) {
        double w = W[i * J + j];
        if (w == 0.0) continue;
        for (int a = 0; a < 3; ++a) {
          double wg = w * g[a];
          if (gR)
            for (int b = 0; b < 3; ++b) gR[9 * j + 3 * a + b] += wg * p[b];
          if (gT) gT[3 * j + a] += wg;
        }
      }
    }
  });
}

}  // namespace rgk
