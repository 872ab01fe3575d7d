#include "ticklab/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "kernels_detail.hpp"

namespace ticklab::kernels {

// ---------------------------------------------------------------------------
// Scalar reference backend: 4-lane blocked accumulation, std::fma for every
// fused step, tail appended sequentially. The AVX2 backend mirrors this
// exactly; the equivalence tests assert bit-identical outputs.
// ---------------------------------------------------------------------------

namespace {

inline double combine(double a0, double a1, double a2, double a3) {
    return (a0 + a2) + (a1 + a3);
}

double sum_scalar(std::span<const double> x) {
    const std::size_t n = x.size();
    const std::size_t nb = n & ~std::size_t{3};
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (std::size_t i = 0; i < nb; i += 4) {
        a0 += x[i];
        a1 += x[i + 1];
        a2 += x[i + 2];
        a3 += x[i + 3];
    }
    double s = combine(a0, a1, a2, a3);
    for (std::size_t i = nb; i < n; ++i) s += x[i];
    return s;
}

double dot_scalar(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    const std::size_t nb = n & ~std::size_t{3};
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (std::size_t i = 0; i < nb; i += 4) {
        a0 = std::fma(x[i], y[i], a0);
        a1 = std::fma(x[i + 1], y[i + 1], a1);
        a2 = std::fma(x[i + 2], y[i + 2], a2);
        a3 = std::fma(x[i + 3], y[i + 3], a3);
    }
    double s = combine(a0, a1, a2, a3);
    for (std::size_t i = nb; i < n; ++i) s = std::fma(x[i], y[i], s);
    return s;
}

MeanVar mean_var_scalar(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    const double mean = sum_scalar(x) / static_cast<double>(n);
    const std::size_t nb = n & ~std::size_t{3};
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (std::size_t i = 0; i < nb; i += 4) {
        const double d0 = x[i] - mean;
        const double d1 = x[i + 1] - mean;
        const double d2 = x[i + 2] - mean;
        const double d3 = x[i + 3] - mean;
        a0 = std::fma(d0, d0, a0);
        a1 = std::fma(d1, d1, a1);
        a2 = std::fma(d2, d2, a2);
        a3 = std::fma(d3, d3, a3);
    }
    double m2 = combine(a0, a1, a2, a3);
    for (std::size_t i = nb; i < n; ++i) {
        const double d = x[i] - mean;
        m2 = std::fma(d, d, m2);
    }
    return {mean, m2, n};
}

double pearson_scalar(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n == 0) return std::nan("");
    const double mx = sum_scalar(x) / static_cast<double>(n);
    const double my = sum_scalar(y) / static_cast<double>(n);
    const std::size_t nb = n & ~std::size_t{3};
    double xy0 = 0.0, xy1 = 0.0, xy2 = 0.0, xy3 = 0.0;
    double xx0 = 0.0, xx1 = 0.0, xx2 = 0.0, xx3 = 0.0;
    double yy0 = 0.0, yy1 = 0.0, yy2 = 0.0, yy3 = 0.0;
    for (std::size_t i = 0; i < nb; i += 4) {
        const double dx0 = x[i] - mx, dy0 = y[i] - my;
        const double dx1 = x[i + 1] - mx, dy1 = y[i + 1] - my;
        const double dx2 = x[i + 2] - mx, dy2 = y[i + 2] - my;
        const double dx3 = x[i + 3] - mx, dy3 = y[i + 3] - my;
        xy0 = std::fma(dx0, dy0, xy0);
        xy1 = std::fma(dx1, dy1, xy1);
        xy2 = std::fma(dx2, dy2, xy2);
        xy3 = std::fma(dx3, dy3, xy3);
        xx0 = std::fma(dx0, dx0, xx0);
        xx1 = std::fma(dx1, dx1, xx1);
        xx2 = std::fma(dx2, dx2, xx2);
        xx3 = std::fma(dx3, dx3, xx3);
        yy0 = std::fma(dy0, dy0, yy0);
        yy1 = std::fma(dy1, dy1, yy1);
        yy2 = std::fma(dy2, dy2, yy2);
        yy3 = std::fma(dy3, dy3, yy3);
    }
    double sxy = combine(xy0, xy1, xy2, xy3);
    double sxx = combine(xx0, xx1, xx2, xx3);
    double syy = combine(yy0, yy1, yy2, yy3);
    for (std::size_t i = nb; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy = std::fma(dx, dy, sxy);
        sxx = std::fma(dx, dx, sxx);
        syy = std::fma(dy, dy, syy);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nan("");
    return sxy / std::sqrt(sxx * syy);
}

double gmadl_mean_scalar(std::span<const double> ret,
                         std::span<const double> pred, double a, double b) {
    using detail::gmadl_accumulate;
    const std::size_t n = ret.size();
    if (n == 0) return 0.0;
    const detail::PowMode mode = detail::pow_mode(b);
    const std::size_t nb = n & ~std::size_t{3};
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (std::size_t i = 0; i < nb; i += 4) {
        a0 = gmadl_accumulate(a0, ret[i], pred[i], a, b, mode);
        a1 = gmadl_accumulate(a1, ret[i + 1], pred[i + 1], a, b, mode);
        a2 = gmadl_accumulate(a2, ret[i + 2], pred[i + 2], a, b, mode);
        a3 = gmadl_accumulate(a3, ret[i + 3], pred[i + 3], a, b, mode);
    }
    double s = combine(a0, a1, a2, a3);
    for (std::size_t i = nb; i < n; ++i)
        s = gmadl_accumulate(s, ret[i], pred[i], a, b, mode);
    return s / static_cast<double>(n);
}

SignStats sign_stats_scalar(std::span<const double> ret,
                            std::span<const double> pred) {
    SignStats st;
    for (std::size_t i = 0; i < ret.size(); ++i) {
        const double t = ret[i] * pred[i];
        if (t > 0.0)
            ++st.agree;
        else if (t < 0.0)
            ++st.disagree;
    }
    return st;
}

}  // namespace

// AVX2 backend, defined in kernels_avx2.cpp when the build includes it.
#ifdef TICKLAB_HAVE_AVX2_TU
namespace avx2 {
double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
MeanVar mean_var(std::span<const double> x);
double pearson(std::span<const double> x, std::span<const double> y);
double gmadl_mean(std::span<const double> ret, std::span<const double> pred,
                  double a, double b);
SignStats sign_stats(std::span<const double> ret, std::span<const double> pred);
}  // namespace avx2
#endif

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

namespace {

bool cpu_has_avx2() {
#if defined(TICKLAB_HAVE_AVX2_TU) && defined(__x86_64__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend initial_backend() {
    if (const char* env = std::getenv("TICKLAB_KERNEL")) {
        const std::string_view v(env);
        if (v == "scalar") return Backend::Scalar;
        if (v == "avx2" && cpu_has_avx2()) return Backend::Avx2;
    }
    return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& backend_slot() {
    static std::atomic<Backend> slot{initial_backend()};
    return slot;
}

}  // namespace

Backend detected_backend() { return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar; }

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

const char* backend_name(Backend b) {
    return b == Backend::Avx2 ? "avx2" : "scalar";
}

void force_backend(Backend b) {
    if (b == Backend::Avx2 && !cpu_has_avx2())
        throw std::runtime_error("kernels: avx2 backend not available on this CPU/build");
    backend_slot().store(b, std::memory_order_relaxed);
}

void reset_backend() { backend_slot().store(initial_backend(), std::memory_order_relaxed); }

double sum(std::span<const double> x) {
#ifdef TICKLAB_HAVE_AVX2_TU
    if (active_backend() == Backend::Avx2) return avx2::sum(x);
#endif
    return sum_scalar(x);
}

double dot(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("kernels::dot: length mismatch");
#ifdef TICKLAB_HAVE_AVX2_TU
    if (active_backend() == Backend::Avx2) return avx2::dot(x, y);
#endif
    return dot_scalar(x, y);
}

MeanVar mean_var(std::span<const double> x) {
#ifdef TICKLAB_HAVE_AVX2_TU
    if (active_backend() == Backend::Avx2) return avx2::mean_var(x);
#endif
    return mean_var_scalar(x);
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("kernels::pearson: length mismatch");
#ifdef TICKLAB_HAVE_AVX2_TU
    if (active_backend() == Backend::Avx2) return avx2::pearson(x, y);
#endif
    return pearson_scalar(x, y);
}

double gmadl_mean(std::span<const double> ret, std::span<const double> pred,
                  double a, double b) {
    if (ret.size() != pred.size())
        throw std::invalid_argument("kernels::gmadl_mean: length mismatch");
#ifdef TICKLAB_HAVE_AVX2_TU
    if (active_backend() == Backend::Avx2) return avx2::gmadl_mean(ret, pred, a, b);
#endif
    return gmadl_mean_scalar(ret, pred, a, b);
}

SignStats sign_stats(std::span<const double> ret, std::span<const double> pred) {
    if (ret.size() != pred.size())
        throw std::invalid_argument("kernels::sign_stats: length mismatch");
#ifdef TICKLAB_HAVE_AVX2_TU
    if (active_backend() == Backend::Avx2) return avx2::sign_stats(ret, pred);
#endif
    return sign_stats_scalar(ret, pred);
}

double exp_sigmoid(double x) { return detail::exp_clamped(x); }

}  // namespace ticklab::kernels
