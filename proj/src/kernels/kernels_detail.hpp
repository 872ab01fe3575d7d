#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>

// Shared between the scalar and AVX2 translation units. Both must execute
// the same floating-point operation sequence; the AVX2 TU is compiled with
// -ffp-contract=off so scalar tail code here cannot pick up stray FMA
// contractions.

namespace ticklab::kernels::detail {

namespace expc {
constexpr double kClamp = 708.0;
constexpr double kLog2e = 1.4426950408889634;
// ln2 split for extended-precision argument reduction
constexpr double kLn2Hi = 6.93145751953125e-1;
constexpr double kLn2Lo = 1.42860682030941723212e-6;
// Taylor coefficients 1/k!, Horner order c13 .. c0
constexpr double kC13 = 1.0 / 6227020800.0;
constexpr double kC12 = 1.0 / 479001600.0;
constexpr double kC11 = 1.0 / 39916800.0;
constexpr double kC10 = 1.0 / 3628800.0;
constexpr double kC9 = 1.0 / 362880.0;
constexpr double kC8 = 1.0 / 40320.0;
constexpr double kC7 = 1.0 / 5040.0;
constexpr double kC6 = 1.0 / 720.0;
constexpr double kC5 = 1.0 / 120.0;
constexpr double kC4 = 1.0 / 24.0;
constexpr double kC3 = 1.0 / 6.0;
constexpr double kC2 = 0.5;
constexpr double kC1 = 1.0;
constexpr double kC0 = 1.0;
}  // namespace expc

// exp with the argument clamped to +-708 so 2^k stays a normal double.
// Range reduction x = k*ln2 + r, |r| <= ln2/2, degree-13 Taylor in r.
inline double exp_clamped(double x) {
    using namespace expc;
    x = std::min(std::max(x, -kClamp), kClamp);
    const double nf = std::nearbyint(x * kLog2e);
    double r = std::fma(nf, -kLn2Hi, x);
    r = std::fma(nf, -kLn2Lo, r);
    double p = kC13;
    p = std::fma(p, r, kC12);
    p = std::fma(p, r, kC11);
    p = std::fma(p, r, kC10);
    p = std::fma(p, r, kC9);
    p = std::fma(p, r, kC8);
    p = std::fma(p, r, kC7);
    p = std::fma(p, r, kC6);
    p = std::fma(p, r, kC5);
    p = std::fma(p, r, kC4);
    p = std::fma(p, r, kC3);
    p = std::fma(p, r, kC2);
    p = std::fma(p, r, kC1);
    p = std::fma(p, r, kC0);
    const int64_t k = static_cast<int64_t>(nf);
    const double scale =
        std::bit_cast<double>(static_cast<uint64_t>(k + 1023) << 52);
    return p * scale;
}

inline double sigmoid(double u) { return 1.0 / (1.0 + exp_clamped(-u)); }

// |r|^b with fast paths for the common exponents.
enum class PowMode { Abs, Square, Generic };

inline PowMode pow_mode(double b) {
    if (b == 1.0) return PowMode::Abs;
    if (b == 2.0) return PowMode::Square;
    return PowMode::Generic;
}

inline double pow_weight(double r, double b, PowMode mode) {
    switch (mode) {
        case PowMode::Abs: return std::fabs(r);
        case PowMode::Square: return r * r;
        default: return std::pow(std::fabs(r), b);
    }
}

// One GMADL term appended to an accumulator: acc - (sigmoid(a*r*p)-1/2)*w.
inline double gmadl_accumulate(double acc, double r, double p, double a,
                               double b, PowMode mode) {
    const double u = a * (r * p);
    const double g = sigmoid(u) - 0.5;
    const double w = pow_weight(r, b, mode);
    return std::fma(-g, w, acc);
}

}  // namespace ticklab::kernels::detail
