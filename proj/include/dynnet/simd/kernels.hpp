#pragma once

// Data-parallel inner loops used by the autodiff tape and the optimizers.
//
// Matrices are row-major. Activations are stored as `rows x batch` blocks so
// every row is contiguous across the batch, which is the axis the SIMD
// variants vectorize over.

#include <cstddef>
#include <string_view>

namespace dynnet::simd {

struct Kernels {
  std::string_view name;

  // y[R x B] = W[R x C] * x[C x B] + b[R]   (b may be null -> zero bias)
  void (*affine)(const double* w, const double* b, const double* x, double* y,
                 std::size_t rows, std::size_t cols, std::size_t batch);

  // y[R x B] += W[R x C] * x[C x B]
  void (*gemm_acc)(const double* w, const double* x, double* y, std::size_t rows,
                   std::size_t cols, std::size_t batch);

  // xbar[C x B] += W^T[C x R] * ybar[R x B]
  void (*gemm_t_acc)(const double* w, const double* ybar, double* xbar,
                     std::size_t rows, std::size_t cols, std::size_t batch);

  // wbar[R x C] += ybar[R x B] * x^T[B x C];  bbar[R] += row sums of ybar
  // (bbar may be null)
  void (*outer_acc)(const double* ybar, const double* x, double* wbar,
                    double* bbar, std::size_t rows, std::size_t cols,
                    std::size_t batch);

  // y = x >= 0 ? x : slope * x
  void (*leaky_relu)(const double* x, double* y, std::size_t n, double slope);

  // out += (x >= 0 ? 1 : slope) * g
  void (*leaky_relu_grad_acc)(const double* x, const double* g, double* out,
                              std::size_t n, double slope);

  double (*dot)(const double* a, const double* b, std::size_t n);

  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const Kernels& scalar_kernels();

// Null when the binary was built without AVX2 support or the CPU lacks
// AVX2+FMA.
const Kernels* avx2_kernels();

// Best available variant. The environment variable DYNNET_KERNELS=scalar
// forces the reference path.
const Kernels& active_kernels();

}  // namespace dynnet::simd
