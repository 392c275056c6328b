#include "rankgan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rankgan/error.hpp"

namespace rankgan::kernels {

// The inner loops run over contiguous rows with no aliasing between inputs
// and output, which lets the compiler vectorize them. Every output element
// accumulates its terms in ascending p order regardless of how rows are
// split across callers, so results do not depend on batching.
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const double* __restrict ap = a.data();
  const double* __restrict bp = b.data();
  double* __restrict cp = c.data();
  if (!accumulate) std::fill(cp, cp + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict crow = cp + i * n;
    const double* arow = ap + i * k;
    std::size_t p = 0;
    // Four terms per pass, added left to right: the same rounding sequence
    // as one term per pass, with a quarter of the loads and stores of c.
    for (; p + 4 <= k; p += 4) {
      const double a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
      const double* __restrict b0 = bp + p * n;
      const double* __restrict b1 = b0 + n;
      const double* __restrict b2 = b1 + n;
      const double* __restrict b3 = b2 + n;
      for (std::size_t j = 0; j < n; ++j)
        crow[j] = (((crow[j] + a0 * b0[j]) + a1 * b1[j]) + a2 * b2[j]) + a3 * b3[j];
    }
    for (; p < k; ++p) {
      const double av = arow[p];
      const double* __restrict brow = bp + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt_acc(std::span<const double> a, std::span<const double> b,
                 std::span<double> c, std::size_t m, std::size_t k, std::size_t n) {
  // c[i, j] += sum_p a[i, p] * b[j, p]. With b transposed the sum for a whole
  // row of c runs as vector updates; each element still sums p = 0, 1, ...
  // from zero before being added to c, exactly like a scalar dot product.
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  std::vector<double> acc(n);
  double* __restrict cp = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    kernels::gemm(a.subspan(i * k, k), bt, acc, 1, k, n, true);
    double* __restrict crow = cp + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += acc[j];
  }
}

void gemm_tn_acc(std::span<const double> a, std::span<const double> b,
                 std::span<double> c, std::size_t m, std::size_t k, std::size_t n) {
  const double* __restrict ap = a.data();
  const double* __restrict bp = b.data();
  double* __restrict cp = c.data();
  std::size_t i = 0;
  // Four rows of a/b per pass, terms added in row order (see gemm).
  for (; i + 4 <= m; i += 4) {
    const double* a0 = ap + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    const double* __restrict b0 = bp + i * n;
    const double* __restrict b1 = b0 + n;
    const double* __restrict b2 = b1 + n;
    const double* __restrict b3 = b2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
      double* __restrict crow = cp + p * n;
      for (std::size_t j = 0; j < n; ++j)
        crow[j] = (((crow[j] + v0 * b0[j]) + v1 * b1[j]) + v2 * b2[j]) + v3 * b3[j];
    }
  }
  for (; i < m; ++i) {
    const double* arow = ap + i * k;
    const double* __restrict brow = bp + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* __restrict crow = cp + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace rankgan::kernels

namespace rankgan::ops {
namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw UsageError("operands live on different tapes");
  }
  return *a.tape();
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " expects a 2-D tensor, got " +
                         shape_string(t.shape()));
  }
}

struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_string(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

enum class Bcast { kEqual, kLeftScalar, kRightScalar };

Bcast broadcast_kind(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() == b.shape()) return Bcast::kEqual;
  if (a.size() == 1) return Bcast::kLeftScalar;
  if (b.size() == 1) return Bcast::kRightScalar;
  throw DimensionError(std::string(what) + ": shapes " + shape_string(a.shape()) +
                       " and " + shape_string(b.shape()) + " are not compatible");
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename F, typename D>
Var unary(Var a, F f, D dfdx) {
  Tape& tape = *a.tape();
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return tape.record(std::move(y), {ia}, [ia, dfdx](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const auto& g = t.grad(self);
    const Tensor& xv = t.value(ia);
    const Tensor& yv = t.value(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

// Binary elementwise op; `da`/`db` give partials given (x, y) operand values.
template <typename F, typename DA, typename DB>
Var binary(Var a, Var b, const char* what, F f, DA da, DB db) {
  Tape& tape = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Bcast kind = broadcast_kind(x, y, what);
  const Shape out_shape = kind == Bcast::kLeftScalar ? y.shape() : x.shape();
  Tensor out(out_shape);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double xv = kind == Bcast::kLeftScalar ? x[0] : x[i];
    const double yv = kind == Bcast::kRightScalar ? y[0] : y[i];
    out[i] = f(xv, yv);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib},
                     [ia, ib, kind, da, db](Tape& t, std::size_t self) {
                       const auto& g = t.grad(self);
                       const Tensor& xt = t.value(ia);
                       const Tensor& yt = t.value(ib);
                       const bool ga_on = t.needs_grad(ia), gb_on = t.needs_grad(ib);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const std::size_t xi = kind == Bcast::kLeftScalar ? 0 : i;
                         const std::size_t yi = kind == Bcast::kRightScalar ? 0 : i;
                         if (ga_on) t.grad(ia)[xi] += g[i] * da(xt[xi], yt[yi]);
                         if (gb_on) t.grad(ib)[yi] += g[i] * db(xt[xi], yt[yi]);
                       }
                     });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_matrix(x, "matmul");
  require_matrix(y, "matmul");
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  if (y.dim(0) != k) {
    throw DimensionError("matmul inner dimensions differ: " + shape_string(x.shape()) +
                         " x " + shape_string(y.shape()));
  }
  Tensor out({m, n});
  kernels::gemm(x.data(), y.data(), out.data(), m, k, n, false);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(ia)) {
      kernels::gemm_nt_acc(g, t.value(ib).data(), t.grad(ia), m, n, k);
    }
    if (t.needs_grad(ib)) {
      kernels::gemm_tn_acc(t.value(ia).data(), g, t.grad(ib), m, k, n);
    }
  });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  require_matrix(x, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {ia}, [ia, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var scale(Var a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double c) {
  return unary(
      a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) {
      throw DomainError("log of non-positive value " + std::to_string(v));
    }
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softmax(Var a, std::size_t axis) {
  const Tensor& x = a.value();
  const AxisSplit s = split_axis(x.shape(), axis);
  Tensor out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.inner; ++j) {
      const std::size_t base = o * s.n * s.inner + j;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < s.n; ++i) mx = std::max(mx, x[base + i * s.inner]);
      double z = 0.0;
      for (std::size_t i = 0; i < s.n; ++i) {
        const double e = std::exp(x[base + i * s.inner] - mx);
        out[base + i * s.inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < s.n; ++i) out[base + i * s.inner] /= z;
    }
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {ia}, [ia, s](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const Tensor& y = t.value(self);
    auto& ga = t.grad(ia);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t j = 0; j < s.inner; ++j) {
        const std::size_t base = o * s.n * s.inner + j;
        double dot = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) {
          const std::size_t p = base + i * s.inner;
          dot += g[p] * y[p];
        }
        for (std::size_t i = 0; i < s.n; ++i) {
          const std::size_t p = base + i * s.inner;
          ga[p] += y[p] * (g[p] - dot);
        }
      }
    }
  });
}

Var log_softmax(Var a, std::size_t axis) {
  const Tensor& x = a.value();
  const AxisSplit s = split_axis(x.shape(), axis);
  Tensor out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.inner; ++j) {
      const std::size_t base = o * s.n * s.inner + j;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < s.n; ++i) mx = std::max(mx, x[base + i * s.inner]);
      double z = 0.0;
      for (std::size_t i = 0; i < s.n; ++i) z += std::exp(x[base + i * s.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t i = 0; i < s.n; ++i) {
        out[base + i * s.inner] = x[base + i * s.inner] - lse;
      }
    }
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {ia}, [ia, s](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const Tensor& y = t.value(self);
    auto& ga = t.grad(ia);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t j = 0; j < s.inner; ++j) {
        const std::size_t base = o * s.n * s.inner + j;
        double gsum = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) gsum += g[base + i * s.inner];
        if (gsum == 0.0) {
          for (std::size_t i = 0; i < s.n; ++i) ga[base + i * s.inner] += g[base + i * s.inner];
          continue;
        }
        for (std::size_t i = 0; i < s.n; ++i) {
          const std::size_t p = base + i * s.inner;
          ga[p] += g[p] - std::exp(y[p]) * gsum;
        }
      }
    }
  });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const std::size_t ia = a.id();
  return a.tape()->record(Tensor::scalar(acc), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (double& v : t.grad(ia)) v += g;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sum_axis(Var a, std::size_t axis) {
  const Tensor& x = a.value();
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < x.rank(); ++i)
    if (i != axis) out_shape.push_back(x.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.n; ++i)
      for (std::size_t j = 0; j < s.inner; ++j)
        out[o * s.inner + j] += x[(o * s.n + i) * s.inner + j];
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {ia}, [ia, s](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t j = 0; j < s.inner; ++j)
          ga[(o * s.n + i) * s.inner + j] += g[o * s.inner + j];
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value();
  out.reshape(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var take_rows(Var table, std::span<const int> ids) {
  const Tensor& w = table.value();
  require_matrix(w, "take_rows");
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  std::vector<std::size_t> idx(ids.size());
  Tensor out({ids.size(), cols});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= rows) {
      throw UsageError("row id " + std::to_string(ids[i]) + " out of range [0, " +
                       std::to_string(rows) + ")");
    }
    idx[i] = static_cast<std::size_t>(ids[i]);
    std::copy_n(w.data().begin() + idx[i] * cols, cols, out.data().begin() + i * cols);
  }
  const std::size_t ia = table.id();
  return table.tape()->record(
      std::move(out), {ia}, [ia, idx = std::move(idx), cols](Tape& t, std::size_t self) {
        const auto& g = t.grad(self);
        auto& ga = t.grad(ia);
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (std::size_t j = 0; j < cols; ++j) ga[idx[i] * cols + j] += g[i * cols + j];
      });
}

Var gather(Var a, std::vector<std::size_t> index, Shape shape) {
  const Tensor& x = a.value();
  if (shape_size(shape) != index.size()) {
    throw DimensionError("gather: " + std::to_string(index.size()) +
                         " indices for shape " + shape_string(shape));
  }
  Tensor out(std::move(shape));
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.size()) throw UsageError("gather index out of range");
    out[i] = x[index[i]];
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {ia},
                          [ia, index = std::move(index)](Tape& t, std::size_t self) {
                            const auto& g = t.grad(self);
                            auto& ga = t.grad(ia);
                            for (std::size_t i = 0; i < index.size(); ++i) ga[index[i]] += g[i];
                          });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  require_matrix(x, "slice_cols");
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (begin > end || end > c) throw DimensionError("slice_cols range out of bounds");
  const std::size_t w = end - begin;
  Tensor out({r, w});
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(x.data().begin() + i * c + begin, w, out.data().begin() + i * w);
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {ia}, [ia, r, c, w, begin](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) ga[i * c + begin + j] += g[i * w + j];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  Tape& tape = *parts[0].tape();
  const std::size_t r = parts[0].value().rows();
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix(p.value(), "concat_cols");
    if (p.value().dim(0) != r) throw DimensionError("concat_cols row counts differ");
    if (p.tape() != &tape) throw UsageError("operands live on different tapes");
    widths.push_back(p.value().dim(1));
    ids.push_back(p.id());
    total += widths.back();
  }
  Tensor out({r, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& x = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(x.data().begin() + i * widths[k], widths[k],
                  out.data().begin() + i * total + off);
    off += widths[k];
  }
  return tape.record(std::move(out), ids, [ids, widths, r, total](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.needs_grad(ids[k])) {
        auto& gk = t.grad(ids[k]);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j)
            gk[i * widths[k] + j] += g[i * total + off + j];
      }
      off += widths[k];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  Tape& tape = *parts[0].tape();
  const std::size_t c = parts[0].value().cols();
  std::vector<std::size_t> sizes, ids;
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require_matrix(p.value(), "concat_rows");
    if (p.value().dim(1) != c) throw DimensionError("concat_rows column counts differ");
    if (p.tape() != &tape) throw UsageError("operands live on different tapes");
    sizes.push_back(p.value().size());
    ids.push_back(p.id());
    rows += p.value().dim(0);
  }
  Tensor out({rows, c});
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + off);
    off += p.value().size();
  }
  return tape.record(std::move(out), ids, [ids, sizes](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.needs_grad(ids[k])) {
        auto& gk = t.grad(ids[k]);
        for (std::size_t i = 0; i < sizes[k]; ++i) gk[i] += g[off + i];
      }
      off += sizes[k];
    }
  });
}

Var normalize_rows(Var a) {
  const Tensor& x = a.value();
  require_matrix(x, "normalize_rows");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> norms(r);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < r; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < c; ++j) sq += x[i * c + j] * x[i * c + j];
    norms[i] = std::sqrt(sq);
    if (norms[i] == 0.0) {
      throw DegenerateFeatureError("feature row " + std::to_string(i) + " has zero norm");
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] / norms[i];
  }
  const std::size_t ia = a.id();
  return a.tape()->record(
      std::move(out), {ia}, [ia, r, c, norms = std::move(norms)](Tape& t, std::size_t self) {
        // d(x/|x|) = (g - y <g, y>) / |x|
        const auto& g = t.grad(self);
        const Tensor& y = t.value(self);
        auto& ga = t.grad(ia);
        for (std::size_t i = 0; i < r; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
          for (std::size_t j = 0; j < c; ++j)
            ga[i * c + j] += (g[i * c + j] - y[i * c + j] * dot) / norms[i];
        }
      });
}

Var conv1d_maxpool(Var x, Var filters, Var bias, std::size_t width, Activation act) {
  Tape& tape = same_tape(x, filters);
  if (bias.tape() != &tape) throw UsageError("operands live on different tapes");
  const Tensor& xs = x.value();
  const Tensor& fs = filters.value();
  const Tensor& bs = bias.value();
  if (xs.rank() != 3) {
    throw DimensionError("conv1d_maxpool expects [n, len, dim] input, got " +
                         shape_string(xs.shape()));
  }
  const std::size_t n = xs.dim(0), len = xs.dim(1), dim = xs.dim(2);
  require_matrix(fs, "conv1d_maxpool filters");
  const std::size_t count = fs.dim(0);
  if (width == 0 || fs.dim(1) != width * dim) {
    throw DimensionError("filter shape " + shape_string(fs.shape()) +
                         " does not match width " + std::to_string(width) +
                         " and embedding dim " + std::to_string(dim));
  }
  if (bs.size() != count) throw DimensionError("conv bias size differs from filter count");
  if (len < width) {
    throw DimensionError("sequence length " + std::to_string(len) +
                         " is shorter than filter width " + std::to_string(width));
  }
  const std::size_t positions = len - width + 1;
  const std::size_t span_len = width * dim;

  Tensor out({n, count});
  std::vector<std::size_t> argmax(n * count);
  std::vector<double> dact(n * count);
  for (std::size_t s = 0; s < n; ++s) {
    const double* seq = xs.data().data() + s * len * dim;
    for (std::size_t f = 0; f < count; ++f) {
      const double* filt = fs.data().data() + f * span_len;
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_p = 0;
      for (std::size_t p = 0; p < positions; ++p) {
        const double* win = seq + p * dim;
        double pre = bs[f];
        for (std::size_t q = 0; q < span_len; ++q) pre += filt[q] * win[q];
        double v = pre;
        if (act == Activation::kTanh) v = std::tanh(pre);
        else if (act == Activation::kRelu) v = pre > 0.0 ? pre : 0.0;
        if (v > best) {
          best = v;
          best_p = p;
        }
      }
      out[s * count + f] = best;
      argmax[s * count + f] = best_p;
      double d = 1.0;
      if (act == Activation::kTanh) d = 1.0 - best * best;
      else if (act == Activation::kRelu) d = best > 0.0 ? 1.0 : 0.0;
      dact[s * count + f] = d;
    }
  }
  const std::size_t ix = x.id(), ifl = filters.id(), ib = bias.id();
  return tape.record(
      std::move(out), {ix, ifl, ib},
      [=, argmax = std::move(argmax), dact = std::move(dact)](Tape& t, std::size_t self) {
        const auto& g = t.grad(self);
        const bool gx = t.needs_grad(ix), gf = t.needs_grad(ifl), gb = t.needs_grad(ib);
        const Tensor& xv = t.value(ix);
        const Tensor& fv = t.value(ifl);
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t f = 0; f < count; ++f) {
            const double d = g[s * count + f] * dact[s * count + f];
            if (d == 0.0) continue;
            const std::size_t off = s * len * dim + argmax[s * count + f] * dim;
            if (gb) t.grad(ib)[f] += d;
            if (gf) {
              auto& gfv = t.grad(ifl);
              for (std::size_t q = 0; q < span_len; ++q) gfv[f * span_len + q] += d * xv[off + q];
            }
            if (gx) {
              auto& gxv = t.grad(ix);
              for (std::size_t q = 0; q < span_len; ++q) gxv[off + q] += d * fv[f * span_len + q];
            }
          }
        }
      });
}

}  // namespace rankgan::ops
