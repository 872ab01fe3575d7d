#include "ticklab/features.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "ticklab/errors.hpp"
#include "ticklab/io.hpp"

namespace ticklab::feat {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double l1_imbalance(const md::BookSnapshot& s) {
    const double b = s.bid_qty[0], a = s.ask_qty[0];
    return (b - a) / (b + a);
}

double spread_rel(const md::BookSnapshot& s) {
    // ((ask-bid)*tick) / (tick*(ask+bid)/2): the tick cancels.
    const double b = static_cast<double>(s.bid_px[0]);
    const double a = static_cast<double>(s.ask_px[0]);
    return 2.0 * (a - b) / (a + b);
}

double volume_concentration(const md::BookSnapshot& s) {
    double total = 0.0;
    for (std::size_t l = 0; l < s.bid_qty.size(); ++l)
        total += s.bid_qty[l] + s.ask_qty[l];
    return (s.bid_qty[0] + s.ask_qty[0]) / total;
}

TradeWindowFeatures trade_window_features(std::span<const md::Trade> trades,
                                          double mid_now, double tick) {
    TradeWindowFeatures out;
    if (trades.empty()) return out;

    double signed_qty = 0.0, total_qty = 0.0;
    double buy_pq = 0.0, buy_q = 0.0, sell_pq = 0.0, sell_q = 0.0;
    for (const md::Trade& t : trades) {
        const double px = static_cast<double>(t.px) * tick;
        signed_qty += t.side > 0 ? t.qty : -t.qty;
        total_qty += t.qty;
        if (t.side > 0) {
            buy_pq += px * t.qty;
            buy_q += t.qty;
        } else {
            sell_pq += px * t.qty;
            sell_q += t.qty;
        }
    }
    out.net_order_flow = signed_qty / total_qty;
    out.volume_traded = total_qty;
    out.n_trades = static_cast<double>(trades.size());
    if (buy_q > 0.0) {
        out.vwap_buy_to_mid = (buy_pq / buy_q - mid_now) / mid_now;
        out.no_buys = false;
    }
    if (sell_q > 0.0) {
        out.vwap_sell_to_mid = (sell_pq / sell_q - mid_now) / mid_now;
        out.no_sells = false;
    }
    if (trades.size() >= 2) {
        // Population variance of (unweighted) trade prices, relative to mid.
        double sum_px = 0.0;
        for (const md::Trade& t : trades) sum_px += static_cast<double>(t.px) * tick;
        const double mean = sum_px / static_cast<double>(trades.size());
        double m2 = 0.0;
        for (const md::Trade& t : trades) {
            const double d = static_cast<double>(t.px) * tick - mean;
            m2 += d * d;
        }
        out.trade_price_variance =
            m2 / static_cast<double>(trades.size()) / (mid_now * mid_now);
    }
    return out;
}

FeatureFrame build_frame(const md::AlignedSeries& s, const FeatureConfig& cfg) {
    if (cfg.trade_window_s < 1) throw UsageError("trade_window_s must be >= 1");
    if (cfg.vol_window < 2) throw UsageError("vol_window must be >= 2");
    const std::size_t n = s.size();
    const auto w = static_cast<std::size_t>(cfg.vol_window);

    FeatureFrame f;
    f.grid_ts = s.grid_ts;
    for (auto& c : f.cols) c.assign(n, kNaN);
    f.label = md::label(s, cfg.label_horizon_s);
    f.valid.assign(n, 0);
    f.flags.assign(n, 0);

    // 1 s mid log-returns; NaN when either endpoint is invalid.
    std::vector<double> ret1(n, kNaN);
    for (std::size_t t = 1; t < n; ++t)
        if (s.valid[t] && s.valid[t - 1])
            ret1[t] = std::log(s.mid_price(t) / s.mid_price(t - 1));

    for (std::size_t t = 0; t < n; ++t) {
        if (!s.valid[t]) continue;
        const auto snap = s.snapshot(t);
        const double mid_now = md::mid(snap, s.tick);

        f.col(Id::L1Imbalance)[t] = l1_imbalance(snap);
        f.col(Id::SpreadRel)[t] = spread_rel(snap);
        f.col(Id::VolumeConcentration)[t] = volume_concentration(snap);

        const std::size_t first_bucket =
            t + 1 >= static_cast<std::size_t>(cfg.trade_window_s)
                ? t + 1 - static_cast<std::size_t>(cfg.trade_window_s)
                : 0;
        const std::span<const md::Trade> window{
            s.trades.data() + s.bucket_begin[first_bucket],
            s.trades.data() + s.bucket_begin[t + 1]};
        const auto tw = trade_window_features(window, mid_now, s.tick);
        f.col(Id::NetOrderFlow)[t] = tw.net_order_flow;
        f.col(Id::VwapBuyToMid)[t] = tw.vwap_buy_to_mid;
        f.col(Id::VwapSellToMid)[t] = tw.vwap_sell_to_mid;
        f.col(Id::VolumeTraded)[t] = tw.volume_traded;
        f.col(Id::NTrades)[t] = tw.n_trades;
        f.col(Id::TradePriceVariance)[t] = tw.trade_price_variance;
        if (tw.no_buys) f.flags[t] |= kNoBuys;
        if (tw.no_sells) f.flags[t] |= kNoSells;

        // Trailing sample sd over the last vol_window 1 s returns.
        if (t >= w) {
            bool ok = true;
            for (std::size_t k = t + 1 - w; ok && k <= t; ++k)
                if (std::isnan(ret1[k])) ok = false;
            if (ok) {
                double sum = 0.0;
                for (std::size_t k = t + 1 - w; k <= t; ++k) sum += ret1[k];
                const double mean = sum / static_cast<double>(w);
                double m2 = 0.0;
                for (std::size_t k = t + 1 - w; k <= t; ++k) {
                    const double d = ret1[k] - mean;
                    m2 += d * d;
                }
                f.col(Id::Volatility)[t] = std::sqrt(m2 / static_cast<double>(w - 1));
            }
        }

        bool finite = std::isfinite(f.label[t]);
        for (const auto& c : f.cols) finite = finite && std::isfinite(c[t]);
        f.valid[t] = finite ? 1 : 0;
    }
    return f;
}

void write_csv(const FeatureFrame& f, const std::string& path) {
    io::LineWriter out(path);
    std::string line = "grid_ts";
    for (const auto name : kFeatureNames) {
        line += ',';
        line += name;
    }
    line += ",label,valid,flags";
    out.write(line);
    for (std::size_t t = 0; t < f.size(); ++t) {
        line = std::to_string(f.grid_ts[t]);
        for (const auto& c : f.cols) {
            line += ',';
            io::append_double(line, c[t]);
        }
        line += ',';
        io::append_double(line, f.label[t]);
        line += ',';
        line += f.valid[t] ? '1' : '0';
        line += ',';
        line += std::to_string(f.flags[t]);
        out.write(line);
    }
    out.close();
}

FeatureFrame read_csv(const std::string& path) {
    io::LineReader in(path);
    std::string line;
    if (!in.next(line)) throw DataError(path + ": empty feature file");
    FeatureFrame f;
    std::vector<std::string_view> cols;
    io::split_csv(line, cols);
    if (cols.size() != kNumFeatures + 4)
        throw DataError(path + ": unexpected feature header");
    while (in.next(line)) {
        io::split_csv(line, cols);
        if (cols.size() != kNumFeatures + 4)
            throw DataError(path + ":" + std::to_string(in.line_no()) + ": bad row");
        f.grid_ts.push_back(io::parse_i64(cols[0]));
        for (std::size_t c = 0; c < kNumFeatures; ++c)
            f.cols[c].push_back(io::parse_double(cols[1 + c]));
        f.label.push_back(io::parse_double(cols[1 + kNumFeatures]));
        f.valid.push_back(cols[2 + kNumFeatures] == "1" ? 1 : 0);
        f.flags.push_back(static_cast<std::uint8_t>(io::parse_i64(cols[3 + kNumFeatures])));
    }
    return f;
}

namespace {

constexpr char kCacheMagic[8] = {'T', 'L', 'F', 'C', '0', '1', '\n', 0};

template <typename T>
void put(std::string& out, const std::vector<T>& v) {
    const std::uint64_t n = v.size();
    out.append(reinterpret_cast<const char*>(&n), sizeof n);
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
}

template <typename T>
std::vector<T> take(const std::string& in, std::size_t& off, const std::string& path) {
    if (off + sizeof(std::uint64_t) > in.size()) throw DataError(path + ": truncated cache");
    std::uint64_t n = 0;
    std::memcpy(&n, in.data() + off, sizeof n);
    off += sizeof n;
    if (off + n * sizeof(T) > in.size()) throw DataError(path + ": truncated cache");
    std::vector<T> v(n);
    std::memcpy(v.data(), in.data() + off, n * sizeof(T));
    off += n * sizeof(T);
    return v;
}

}  // namespace

void write_cache(const FeatureFrame& f, const std::string& path) {
    std::string blob(kCacheMagic, sizeof kCacheMagic);
    put(blob, f.grid_ts);
    for (const auto& c : f.cols) put(blob, c);
    put(blob, f.label);
    put(blob, f.valid);
    put(blob, f.flags);
    io::write_text_file(path, blob);
}

FeatureFrame read_cache(const std::string& path) {
    const std::string blob = io::read_text_file(path);
    if (blob.size() < sizeof kCacheMagic ||
        std::memcmp(blob.data(), kCacheMagic, sizeof kCacheMagic) != 0)
        throw DataError(path + ": not a feature cache");
    std::size_t off = sizeof kCacheMagic;
    FeatureFrame f;
    f.grid_ts = take<std::int64_t>(blob, off, path);
    for (auto& c : f.cols) c = take<double>(blob, off, path);
    f.label = take<double>(blob, off, path);
    f.valid = take<std::uint8_t>(blob, off, path);
    f.flags = take<std::uint8_t>(blob, off, path);
    if (off != blob.size()) throw DataError(path + ": trailing bytes in cache");
    return f;
}

}  // namespace ticklab::feat
