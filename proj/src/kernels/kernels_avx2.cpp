// AVX2 variants of the reduction kernels. Compiled with -mavx2 -mfma
// -ffp-contract=off; must stay bit-identical to the scalar reference in
// kernels.cpp (same lane blocking, same combine order, same tail handling).

#include <immintrin.h>

#include <cmath>

#include "ticklab/kernels.hpp"
#include "kernels_detail.hpp"

namespace ticklab::kernels::avx2 {

namespace {

// (a0+a2) + (a1+a3), matching the scalar combine.
inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d pair = _mm_add_pd(lo, hi);
    const __m128d swapped = _mm_unpackhi_pd(pair, pair);
    return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

// exp(clamp(x, -708, 708)) lane-wise; same constants and operation order as
// detail::exp_clamped.
inline __m256d exp_pd(__m256d x) {
    using namespace detail::expc;
    x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-kClamp)), _mm256_set1_pd(kClamp));
    const __m256d nf = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kLog2e)),
                                       _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fmadd_pd(nf, _mm256_set1_pd(-kLn2Hi), x);
    r = _mm256_fmadd_pd(nf, _mm256_set1_pd(-kLn2Lo), r);
    __m256d p = _mm256_set1_pd(kC13);
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kC12));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kC11));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kC10));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kC9));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kC8));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kC7));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kC6));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kC5));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kC4));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kC3));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kC2));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kC1));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kC0));
    const __m128i k32 = _mm256_cvtpd_epi32(nf);
    const __m256i k64 = _mm256_cvtepi32_epi64(k32);
    const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(k64, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

inline __m256d sigmoid_pd(__m256d u) {
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), u));
    return _mm256_div_pd(_mm256_set1_pd(1.0), _mm256_add_pd(_mm256_set1_pd(1.0), e));
}

inline __m256d abs_pd(__m256d x) {
    const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL));
    return _mm256_and_pd(x, mask);
}

}  // namespace

double sum(std::span<const double> x) {
    const std::size_t n = x.size();
    const std::size_t nb = n & ~std::size_t{3};
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < nb; i += 4)
        acc = _mm256_add_pd(acc, _mm256_loadu_pd(x.data() + i));
    double s = hsum(acc);
    for (std::size_t i = nb; i < n; ++i) s += x[i];
    return s;
}

double dot(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    const std::size_t nb = n & ~std::size_t{3};
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < nb; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x.data() + i),
                              _mm256_loadu_pd(y.data() + i), acc);
    double s = hsum(acc);
    for (std::size_t i = nb; i < n; ++i) s = std::fma(x[i], y[i], s);
    return s;
}

MeanVar mean_var(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    const double mean = sum(x) / static_cast<double>(n);
    const std::size_t nb = n & ~std::size_t{3};
    const __m256d vmean = _mm256_set1_pd(mean);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < nb; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x.data() + i), vmean);
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double m2 = hsum(acc);
    for (std::size_t i = nb; i < n; ++i) {
        const double d = x[i] - mean;
        m2 = std::fma(d, d, m2);
    }
    return {mean, m2, n};
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n == 0) return std::nan("");
    const double mx = sum(x) / static_cast<double>(n);
    const double my = sum(y) / static_cast<double>(n);
    const std::size_t nb = n & ~std::size_t{3};
    const __m256d vmx = _mm256_set1_pd(mx);
    const __m256d vmy = _mm256_set1_pd(my);
    __m256d axy = _mm256_setzero_pd();
    __m256d axx = _mm256_setzero_pd();
    __m256d ayy = _mm256_setzero_pd();
    for (std::size_t i = 0; i < nb; i += 4) {
        const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(x.data() + i), vmx);
        const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(y.data() + i), vmy);
        axy = _mm256_fmadd_pd(dx, dy, axy);
        axx = _mm256_fmadd_pd(dx, dx, axx);
        ayy = _mm256_fmadd_pd(dy, dy, ayy);
    }
    double sxy = hsum(axy);
    double sxx = hsum(axx);
    double syy = hsum(ayy);
    for (std::size_t i = nb; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy = std::fma(dx, dy, sxy);
        sxx = std::fma(dx, dx, sxx);
        syy = std::fma(dy, dy, syy);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nan("");
    return sxy / std::sqrt(sxx * syy);
}

double gmadl_mean(std::span<const double> ret, std::span<const double> pred,
                  double a, double b) {
    const std::size_t n = ret.size();
    if (n == 0) return 0.0;
    const detail::PowMode mode = detail::pow_mode(b);
    const std::size_t nb = n & ~std::size_t{3};
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vhalf = _mm256_set1_pd(0.5);
    __m256d acc = _mm256_setzero_pd();
    alignas(32) double lanes[4];
    for (std::size_t i = 0; i < nb; i += 4) {
        const __m256d r = _mm256_loadu_pd(ret.data() + i);
        const __m256d p = _mm256_loadu_pd(pred.data() + i);
        const __m256d u = _mm256_mul_pd(va, _mm256_mul_pd(r, p));
        const __m256d g = _mm256_sub_pd(sigmoid_pd(u), vhalf);
        __m256d w;
        switch (mode) {
            case detail::PowMode::Abs:
                w = abs_pd(r);
                break;
            case detail::PowMode::Square:
                w = _mm256_mul_pd(r, r);
                break;
            default:
                _mm256_store_pd(lanes, abs_pd(r));
                lanes[0] = std::pow(lanes[0], b);
                lanes[1] = std::pow(lanes[1], b);
                lanes[2] = std::pow(lanes[2], b);
                lanes[3] = std::pow(lanes[3], b);
                w = _mm256_load_pd(lanes);
                break;
        }
        acc = _mm256_fnmadd_pd(g, w, acc);
    }
    double s = hsum(acc);
    for (std::size_t i = nb; i < n; ++i)
        s = detail::gmadl_accumulate(s, ret[i], pred[i], a, b, mode);
    return s / static_cast<double>(n);
}

SignStats sign_stats(std::span<const double> ret, std::span<const double> pred) {
    const std::size_t n = ret.size();
    const std::size_t nb = n & ~std::size_t{3};
    const __m256d zero = _mm256_setzero_pd();
    SignStats st;
    for (std::size_t i = 0; i < nb; i += 4) {
        const __m256d t = _mm256_mul_pd(_mm256_loadu_pd(ret.data() + i),
                                        _mm256_loadu_pd(pred.data() + i));
        const int gt = _mm256_movemask_pd(_mm256_cmp_pd(t, zero, _CMP_GT_OQ));
        const int lt = _mm256_movemask_pd(_mm256_cmp_pd(t, zero, _CMP_LT_OQ));
        st.agree += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(gt)));
        st.disagree += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(lt)));
    }
    for (std::size_t i = nb; i < n; ++i) {
        const double t = ret[i] * pred[i];
        if (t > 0.0)
            ++st.agree;
        else if (t < 0.0)
            ++st.disagree;
    }
    return st;
}

}  // namespace ticklab::kernels::avx2
