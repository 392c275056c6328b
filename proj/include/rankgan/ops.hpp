#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rankgan/tape.hpp"

// Differentiable tensor operations. Each op computes its value eagerly and,
// when any input needs a gradient, records the matching gradient rule.
//
// Broadcasting is limited to equal shapes or one operand of size 1.
namespace rankgan::ops {

enum class Activation { kIdentity, kTanh, kRelu };

// 2-D matrix product; shapes [m,k] x [k,n] -> [m,n].
Var matmul(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);

Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var exp(Var a);
// Throws DomainError on any non-positive entry.
Var log(Var a);

// Softmax along `axis`, max-subtracted.
Var softmax(Var a, std::size_t axis);
Var log_softmax(Var a, std::size_t axis);

Var sum(Var a);
Var mean(Var a);
// Sum along one axis; the axis is removed from the shape.
Var sum_axis(Var a, std::size_t axis);

Var reshape(Var a, Shape shape);

// Row lookup: out[i, :] = table[ids[i], :].
Var take_rows(Var table, std::span<const int> ids);
// Flat element gather: out.flat[i] = a.flat[index[i]], reshaped to `shape`.
Var gather(Var a, std::vector<std::size_t> index, Shape shape);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);

// Each row divided by its Euclidean norm. Throws DegenerateFeatureError on a
// zero row.
Var normalize_rows(Var a);

// Valid 1-D convolution over time followed by max-over-time pooling.
//   x       [n, len, dim]     embedded sequences
//   filters [count, width*dim]
//   bias    [1, count]
// Returns [n, count]: max_p act(bias + <filter, x[p:p+width]>). Ties in the
// max go to the lowest time index.
Var conv1d_maxpool(Var x, Var filters, Var bias, std::size_t width,
                   Activation act);

}  // namespace rankgan::ops

namespace rankgan::kernels {

// c[m,n] (+)= a[m,k] * b[k,n]
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// c[m,n] += a[m,k] * b[n,k]^T
void gemm_nt_acc(std::span<const double> a, std::span<const double> b,
                 std::span<double> c, std::size_t m, std::size_t k, std::size_t n);
// c[k,n] += a[m,k]^T * b[m,n]
void gemm_tn_acc(std::span<const double> a, std::span<const double> b,
                 std::span<double> c, std::size_t m, std::size_t k, std::size_t n);

}  // namespace rankgan::kernels
