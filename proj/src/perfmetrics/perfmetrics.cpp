#include "ticklab/perfmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ticklab/errors.hpp"
#include "ticklab/kernels.hpp"

namespace ticklab::perf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double ibeta(double a, double b, double x) {
    if (!(a > 0) || !(b > 0)) throw UsageError("ibeta needs positive shape");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

std::vector<double> simple_returns(std::span<const double> equity) {
    if (equity.size() < 2)
        throw UsageError("need at least 2 equity points for returns");
    std::vector<double> r;
    r.reserve(equity.size() - 1);
    for (std::size_t i = 1; i < equity.size(); ++i) {
        if (equity[i - 1] == 0.0)
            throw NumericError("zero equity point makes returns undefined");
        r.push_back(equity[i] / equity[i - 1] - 1.0);
    }
    return r;
}

double arc(std::span<const double> equity, double periods_per_year) {
    if (equity.size() < 2) throw UsageError("arc needs at least 2 equity points");
    if (!(periods_per_year > 0))
        throw UsageError("periods_per_year must be positive");
    if (!(equity.front() > 0)) return kNaN;
    const double ratio = equity.back() / equity.front();
    if (!(ratio > 0)) return kNaN;
    const double years =
        static_cast<double>(equity.size() - 1) / periods_per_year;
    return std::pow(ratio, 1.0 / years) - 1.0;
}

double asd(std::span<const double> returns, double periods_per_year) {
    if (returns.size() < 2) throw UsageError("asd needs at least 2 returns");
    if (!(periods_per_year > 0))
        throw UsageError("periods_per_year must be positive");
    const auto mv = kernels::mean_var(returns);
    const double var = mv.m2 / static_cast<double>(mv.n - 1);
    return std::sqrt(var) * std::sqrt(periods_per_year);
}

double ir_star(double arc, double asd) {
    if (std::isnan(arc) || !(asd > 0)) return kNaN;
    return arc / asd;
}

double mdd(std::span<const double> equity) {
    if (equity.empty()) throw UsageError("mdd needs a nonempty equity curve");
    double peak = equity[0];
    double worst = 0.0;
    for (double v : equity) {
        if (v > peak) peak = v;
        if (!(peak > 0)) return kNaN;
        worst = std::max(worst, (peak - v) / peak);
    }
    return worst;
}

double mld_years(std::span<const double> equity, double periods_per_year) {
    if (equity.empty()) throw UsageError("mld needs a nonempty equity curve");
    if (!(periods_per_year > 0))
        throw UsageError("periods_per_year must be positive");
    std::size_t peak_idx = 0;
    double peak = equity[0];
    bool dropped = false;
    std::size_t worst = 0;
    for (std::size_t i = 1; i < equity.size(); ++i) {
        if (equity[i] > peak) {
            if (dropped) worst = std::max(worst, i - peak_idx);
            peak = equity[i];
            peak_idx = i;
            dropped = false;
        } else if (equity[i] < peak) {
            dropped = true;
        }
    }
    if (dropped) worst = std::max(worst, equity.size() - 1 - peak_idx);
    return static_cast<double>(worst) / periods_per_year;
}

double ir_double_star(double arc, double asd, double mdd) {
    if (std::isnan(arc) || !(asd > 0) || !(mdd > 0)) return kNaN;
    const double sign = arc > 0 ? 1.0 : arc < 0 ? -1.0 : 0.0;
    return arc * arc * sign / (asd * mdd);
}

TTest ttest_vs_benchmark(std::span<const double> strategy_returns,
                         std::span<const double> benchmark_returns) {
    if (strategy_returns.size() < 2 || benchmark_returns.size() < 2)
        throw UsageError("t-test needs at least 2 returns per sample");
    const auto a = kernels::mean_var(strategy_returns);
    const auto b = kernels::mean_var(benchmark_returns);
    const double n1 = static_cast<double>(a.n);
    const double n2 = static_cast<double>(b.n);
    const double v1 = a.m2 / (n1 - 1.0);
    const double v2 = b.m2 / (n2 - 1.0);
    if (v1 == 0.0 && v2 == 0.0) return {kNaN, kNaN, kNaN};
    const double se1 = v1 / n1;
    const double se2 = v2 / n2;
    TTest r;
    r.t = (a.mean - b.mean) / std::sqrt(se1 + se2);
    r.df = (se1 + se2) * (se1 + se2) /
           (se1 * se1 / (n1 - 1.0) + se2 * se2 / (n2 - 1.0));
    const double x = r.df / (r.df + r.t * r.t);
    const double tail = 0.5 * ibeta(0.5 * r.df, 0.5, x);
    r.p = r.t >= 0 ? tail : 1.0 - tail;
    return r;
}

MetricsReport compute(std::span<const double> equity,
                      std::span<const double> benchmark_equity,
                      double periods_per_year) {
    MetricsReport r;
    const auto rets = simple_returns(equity);
    r.periods_per_year = periods_per_year;
    r.n_obs = rets.size();
    r.arc = arc(equity, periods_per_year);
    r.asd = asd(rets, periods_per_year);
    r.ir_star = ir_star(r.arc, r.asd);
    r.mdd = mdd(equity);
    r.mld_years = mld_years(equity, periods_per_year);
    r.ir_double_star = ir_double_star(r.arc, r.asd, r.mdd);
    if (benchmark_equity.empty()) {
        r.t_stat = kNaN;
        r.p_value = kNaN;
    } else {
        const auto bench = simple_returns(benchmark_equity);
        const auto tt = ttest_vs_benchmark(rets, bench);
        r.t_stat = tt.t;
        r.p_value = tt.p;
    }
    return r;
}

nlohmann::json report_json(const MetricsReport& r) {
    return {{"arc", r.arc},
            {"asd", r.asd},
            {"ir_star", r.ir_star},
            {"mdd", r.mdd},
            {"mld_years", r.mld_years},
            {"ir_double_star", r.ir_double_star},
            {"n_obs", r.n_obs},
            {"periods_per_year", r.periods_per_year},
            {"t_stat", r.t_stat},
            {"p_value", r.p_value}};
}

}  // namespace ticklab::perf
