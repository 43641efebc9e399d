#pragma once

// Raw compute kernels behind the conv and dense layers.
//
// Two implementations with identical signatures:
//   serial::    plain loops, the reference used by tests
//   parallel::  OpenMP over independent output elements
//
// Every output element is reduced in the same fixed order in both, so the
// two produce bit-identical results for any thread count. Gradient outputs
// named grad_w / grad_b ACCUMULATE (+=); grad_in is overwritten.

#include <cstddef>
#include <span>

namespace sherlock::kernels {

struct ConvDims {
  std::size_t length;    // L, input positions
  std::size_t channels;  // C
  std::size_t width;     // K, kernel size
  std::size_t filters;   // F

  std::size_t out_length() const { return length - width + 1; }
};

struct DenseDims {
  std::size_t inputs;   // N
  std::size_t outputs;  // M
};

namespace serial {
void conv1d_forward(std::span<const double> in, std::span<const double> w,
                    std::span<const double> b, std::span<double> out, const ConvDims& d);
// grad_in may be empty to skip the input gradient.
void conv1d_backward(std::span<const double> in, std::span<const double> w,
                     std::span<const double> grad_out, std::span<double> grad_in,
                     std::span<double> grad_w, std::span<double> grad_b, const ConvDims& d);
void dense_forward(std::span<const double> in, std::span<const double> w,
                   std::span<const double> b, std::span<double> out, const DenseDims& d);
void dense_backward(std::span<const double> in, std::span<const double> w,
                    std::span<const double> grad_out, std::span<double> grad_in,
                    std::span<double> grad_w, std::span<double> grad_b, const DenseDims& d);
}  // namespace serial

namespace parallel {
void conv1d_forward(std::span<const double> in, std::span<const double> w,
                    std::span<const double> b, std::span<double> out, const ConvDims& d);
void conv1d_backward(std::span<const double> in, std::span<const double> w,
                     std::span<const double> grad_out, std::span<double> grad_in,
                     std::span<double> grad_w, std::span<double> grad_b, const ConvDims& d);
void dense_forward(std::span<const double> in, std::span<const double> w,
                   std::span<const double> b, std::span<double> out, const DenseDims& d);
void dense_backward(std::span<const double> in, std::span<const double> w,
                    std::span<const double> grad_out, std::span<double> grad_in,
                    std::span<double> grad_w, std::span<double> grad_b, const DenseDims& d);
}  // namespace parallel

/// Threads OpenMP will use for parallel:: kernels (1 when built without OpenMP).
int max_threads();

}  // namespace sherlock::kernels
