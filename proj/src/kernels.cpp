#include "sherlock/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sherlock::kernels {

namespace {

// Four independent partial sums, combined in a fixed order.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void conv_out_element(const double* in, const double* w, const double* b, double* out,
                             const ConvDims& d, std::size_t t, std::size_t f) {
  const auto span = d.width * d.channels;
  out[t * d.filters + f] = b[f] + dot(in + t * d.channels, w + f * span, span);
}

// Kernel and bias gradient of one filter. Positions with zero upstream
// gradient are skipped; after global max pooling that is all but one.
inline void conv_filter_grad(const double* in, const double* g, double* gw, double* gb,
                             const ConvDims& d, std::size_t f) {
  const auto span = d.width * d.channels;
  const auto out_len = d.out_length();
  double* row = gw + f * span;
  double bias = 0.0;
  for (std::size_t t = 0; t < out_len; ++t) {
    const double gt = g[t * d.filters + f];
    if (gt == 0.0) continue;
    bias += gt;
    const double* x = in + t * d.channels;
    for (std::size_t j = 0; j < span; ++j) row[j] += gt * x[j];
  }
  gb[f] += bias;
}

inline void conv_input_grad_row(const double* w, const double* g, double* gi, const ConvDims& d,
                                std::size_t p) {
  const auto span = d.width * d.channels;
  const auto out_len = d.out_length();
  double* row = gi + p * d.channels;
  std::fill(row, row + d.channels, 0.0);
  for (std::size_t k = 0; k < d.width; ++k) {
    if (k > p || p - k >= out_len) continue;
    const auto t = p - k;
    for (std::size_t f = 0; f < d.filters; ++f) {
      const double gt = g[t * d.filters + f];
      if (gt == 0.0) continue;
      const double* wk = w + f * span + k * d.channels;
      for (std::size_t c = 0; c < d.channels; ++c) row[c] += gt * wk[c];
    }
  }
}

inline void dense_out_element(const double* in, const double* w, const double* b, double* out,
                              const DenseDims& d, std::size_t m) {
  double acc = 0.0;
  for (std::size_t n = 0; n < d.inputs; ++n) acc += in[n] * w[n * d.outputs + m];
  out[m] = acc + b[m];
}

inline void dense_weight_row_grad(const double* in, const double* g, double* gw,
                                  const DenseDims& d, std::size_t n) {
  const double x = in[n];
  if (x == 0.0) return;
  double* row = gw + n * d.outputs;
  for (std::size_t m = 0; m < d.outputs; ++m) row[m] += x * g[m];
}

inline void dense_input_grad(const double* w, const double* g, double* gi, const DenseDims& d,
                             std::size_t n) {
  gi[n] = dot(w + n * d.outputs, g, d.outputs);
}

}  // namespace

namespace serial {

void conv1d_forward(std::span<const double> in, std::span<const double> w,
                    std::span<const double> b, std::span<double> out, const ConvDims& d) {
  const auto out_len = d.out_length();
  for (std::size_t t = 0; t < out_len; ++t) {
    for (std::size_t f = 0; f < d.filters; ++f) {
      conv_out_element(in.data(), w.data(), b.data(), out.data(), d, t, f);
    }
  }
}

void conv1d_backward(std::span<const double> in, std::span<const double> w,
                     std::span<const double> grad_out, std::span<double> grad_in,
                     std::span<double> grad_w, std::span<double> grad_b, const ConvDims& d) {
  for (std::size_t f = 0; f < d.filters; ++f) {
    conv_filter_grad(in.data(), grad_out.data(), grad_w.data(), grad_b.data(), d, f);
  }
  if (grad_in.empty()) return;
  for (std::size_t p = 0; p < d.length; ++p) {
    conv_input_grad_row(w.data(), grad_out.data(), grad_in.data(), d, p);
  }
}

void dense_forward(std::span<const double> in, std::span<const double> w,
                   std::span<const double> b, std::span<double> out, const DenseDims& d) {
  for (std::size_t m = 0; m < d.outputs; ++m) {
    dense_out_element(in.data(), w.data(), b.data(), out.data(), d, m);
  }
}

void dense_backward(std::span<const double> in, std::span<const double> w,
                    std::span<const double> grad_out, std::span<double> grad_in,
                    std::span<double> grad_w, std::span<double> grad_b, const DenseDims& d) {
  for (std::size_t n = 0; n < d.inputs; ++n) {
    dense_weight_row_grad(in.data(), grad_out.data(), grad_w.data(), d, n);
  }
  for (std::size_t m = 0; m < d.outputs; ++m) grad_b[m] += grad_out[m];
  if (grad_in.empty()) return;
  for (std::size_t n = 0; n < d.inputs; ++n) {
    dense_input_grad(w.data(), grad_out.data(), grad_in.data(), d, n);
  }
}

}  // namespace serial

namespace parallel {

void conv1d_forward(std::span<const double> in, std::span<const double> w,
                    std::span<const double> b, std::span<double> out, const ConvDims& d) {
  const auto out_len = static_cast<long>(d.out_length());
  const auto filters = static_cast<long>(d.filters);
#pragma omp parallel for collapse(2) schedule(static)
  for (long t = 0; t < out_len; ++t) {
    for (long f = 0; f < filters; ++f) {
      conv_out_element(in.data(), w.data(), b.data(), out.data(), d, t, f);
    }
  }
}

void conv1d_backward(std::span<const double> in, std::span<const double> w,
                     std::span<const double> grad_out, std::span<double> grad_in,
                     std::span<double> grad_w, std::span<double> grad_b, const ConvDims& d) {
  const auto filters = static_cast<long>(d.filters);
#pragma omp parallel for schedule(static)
  for (long f = 0; f < filters; ++f) {
    conv_filter_grad(in.data(), grad_out.data(), grad_w.data(), grad_b.data(), d, f);
  }
  if (grad_in.empty()) return;
  const auto length = static_cast<long>(d.length);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < length; ++p) {
    conv_input_grad_row(w.data(), grad_out.data(), grad_in.data(), d, p);
  }
}

void dense_forward(std::span<const double> in, std::span<const double> w,
                   std::span<const double> b, std::span<double> out, const DenseDims& d) {
  const auto outputs = static_cast<long>(d.outputs);
#pragma omp parallel for schedule(static)
  for (long m = 0; m < outputs; ++m) {
    dense_out_element(in.data(), w.data(), b.data(), out.data(), d, m);
  }
}

void dense_backward(std::span<const double> in, std::span<const double> w,
                    std::span<const double> grad_out, std::span<double> grad_in,
                    std::span<double> grad_w, std::span<double> grad_b, const DenseDims& d) {
  const auto inputs = static_cast<long>(d.inputs);
#pragma omp parallel for schedule(static)
  for (long n = 0; n < inputs; ++n) {
    dense_weight_row_grad(in.data(), grad_out.data(), grad_w.data(), d, n);
  }
  for (std::size_t m = 0; m < d.outputs; ++m) grad_b[m] += grad_out[m];
  if (grad_in.empty()) return;
#pragma omp parallel for schedule(static)
  for (long n = 0; n < inputs; ++n) {
    dense_input_grad(w.data(), grad_out.data(), grad_in.data(), d, n);
  }
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace sherlock::kernels
