#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"

namespace ticklab::perf {

// Always-open crypto market on a 1 s grid.
inline constexpr double kCryptoPeriodsPerYear = 365.0 * 86400.0;

// Per-period simple returns e[i]/e[i-1] - 1.
std::vector<double> simple_returns(std::span<const double> equity);

// Annualized compound rate: (V_n/V_0)^(1/years) - 1 with
// years = (points - 1) / periods_per_year. NaN when the ratio is nonpositive.
double arc(std::span<const double> equity, double periods_per_year);

// Sample standard deviation (n-1) of per-period returns, scaled by
// sqrt(periods_per_year).
double asd(std::span<const double> returns, double periods_per_year);

double ir_star(double arc, double asd);

// Largest peak-to-trough loss as a fraction of the running peak.
double mdd(std::span<const double> equity);

// Longest stretch, in years, from a running peak to the first later point
// strictly above it; an unrecovered trailing drawdown counts to the end.
// Flat-at-peak stretches are not drawdowns.
double mld_years(std::span<const double> equity, double periods_per_year);

double ir_double_star(double arc, double asd, double mdd);

struct TTest {
    double t = 0.0;
    double df = 0.0;
    double p = 0.0;  // one-sided, H1: mean(strategy) > mean(benchmark)
};

// Welch two-sample t on per-period returns. NaN marker when both samples
// have zero variance.
TTest ttest_vs_benchmark(std::span<const double> strategy_returns,
                         std::span<const double> benchmark_returns);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double ibeta(double a, double b, double x);

struct MetricsReport {
    double arc = 0.0;
    double asd = 0.0;
    double ir_star = 0.0;
    double mdd = 0.0;
    double mld_years = 0.0;
    double ir_double_star = 0.0;
    std::size_t n_obs = 0;  // return periods
    double periods_per_year = 0.0;
    double t_stat = 0.0;  // NaN without a benchmark
    double p_value = 0.0;
};

// benchmark_equity may be empty (no t-test columns).
MetricsReport compute(std::span<const double> equity,
                      std::span<const double> benchmark_equity,
                      double periods_per_year);

nlohmann::json report_json(const MetricsReport& r);

}  // namespace ticklab::perf
