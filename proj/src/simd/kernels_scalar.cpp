#include "dynnet/simd/kernels.hpp"

#include <algorithm>

namespace dynnet::simd {
namespace {

void gemm_acc_scalar(const double* w, const double* x, double* y,
                     std::size_t rows, std::size_t cols, std::size_t batch) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* yr = y + r * batch;
    for (std::size_t c = 0; c < cols; ++c) {
      const double wrc = w[r * cols + c];
      const double* xc = x + c * batch;
      for (std::size_t k = 0; k < batch; ++k) yr[k] += wrc * xc[k];
    }
  }
}

void affine_scalar(const double* w, const double* b, const double* x, double* y,
                   std::size_t rows, std::size_t cols, std::size_t batch) {
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill_n(y + r * batch, batch, b ? b[r] : 0.0);
  }
  gemm_acc_scalar(w, x, y, rows, cols, batch);
}

void gemm_t_acc_scalar(const double* w, const double* ybar, double* xbar,
                       std::size_t rows, std::size_t cols, std::size_t batch) {
  for (std::size_t c = 0; c < cols; ++c) {
    double* xc = xbar + c * batch;
    for (std::size_t r = 0; r < rows; ++r) {
      const double wrc = w[r * cols + c];
      const double* yr = ybar + r * batch;
      for (std::size_t k = 0; k < batch; ++k) xc[k] += wrc * yr[k];
    }
  }
}

void outer_acc_scalar(const double* ybar, const double* x, double* wbar,
                      double* bbar, std::size_t rows, std::size_t cols,
                      std::size_t batch) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* yr = ybar + r * batch;
    for (std::size_t c = 0; c < cols; ++c) {
      const double* xc = x + c * batch;
      double s = 0.0;
      for (std::size_t k = 0; k < batch; ++k) s += yr[k] * xc[k];
      wbar[r * cols + c] += s;
    }
    if (bbar) {
      double s = 0.0;
      for (std::size_t k = 0; k < batch; ++k) s += yr[k];
      bbar[r] += s;
    }
  }
}

void leaky_relu_scalar(const double* x, double* y, std::size_t n, double slope) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_grad_acc_scalar(const double* x, const double* g, double* out,
                                std::size_t n, double slope) {
  for (std::size_t i = 0; i < n; ++i) out[i] += (x[i] >= 0.0 ? 1.0 : slope) * g[i];
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{
      "scalar",          affine_scalar,
      gemm_acc_scalar,   gemm_t_acc_scalar,
      outer_acc_scalar,  leaky_relu_scalar,
      leaky_relu_grad_acc_scalar,
      dot_scalar,        axpy_scalar,
  };
  return k;
}

}  // namespace dynnet::simd
