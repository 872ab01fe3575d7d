#pragma once

#include <cstddef>
#include <span>

namespace ticklab::kernels {

// Vectorized reduction kernels used by the numeric hot paths (loss and fit
// metrics, correlations, equity statistics).
//
// Every kernel is defined in terms of 4-lane blocked accumulation: four
// independent accumulators over consecutive elements, combined as
// (acc0+acc2)+(acc1+acc3), scalar tail appended last, FMA everywhere a
// product feeds a sum. The scalar reference implements that recipe with
// std::fma and the AVX2 variant implements the same recipe with intrinsics,
// so the two backends produce bit-identical results and runtime dispatch
// never changes any output.

enum class Backend { Scalar, Avx2 };

// Best backend supported by this CPU/build.
Backend detected_backend();

Backend active_backend();
const char* backend_name(Backend b);

// Test hook. Forcing Avx2 on a CPU without it throws.
void force_backend(Backend b);
void reset_backend();

struct MeanVar {
    double mean = 0.0;
    double m2 = 0.0;  // sum of squared deviations from the mean
    std::size_t n = 0;
};

struct SignStats {
    std::size_t agree = 0;     // ret * pred > 0
    std::size_t disagree = 0;  // ret * pred < 0
};

double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
MeanVar mean_var(std::span<const double> x);

// Pearson correlation; NaN when either series is degenerate.
double pearson(std::span<const double> x, std::span<const double> y);

// Mean of -(sigmoid(a*ret*pred) - 1/2) * |ret|^b over all samples.
double gmadl_mean(std::span<const double> ret, std::span<const double> pred,
                  double a, double b);

SignStats sign_stats(std::span<const double> ret, std::span<const double> pred);

// Saturating exp used inside the sigmoid: argument clamped to [-708, 708]
// so the result stays normal. Exposed for accuracy tests.
double exp_sigmoid(double x);

}  // namespace ticklab::kernels
