#include "ticklab/marketdata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ticklab/errors.hpp"
#include "ticklab/io.hpp"

namespace ticklab::md {

namespace {

std::int64_t to_ticks(double price, double tick) {
    return std::llround(price / tick);
}

struct BookRow {
    std::int64_t ts_ms;
    std::vector<std::int64_t> bid_px, ask_px;
    std::vector<double> bid_qty, ask_qty;
};

// Header is `ts_ms` followed by bid_px_i,bid_qty_i,ask_px_i,ask_qty_i per
// level. Malformed rows are hard errors with the line number; rows that
// parse but violate book invariants are rejected and counted.
std::vector<BookRow> read_book(const std::string& path, const IngestConfig& cfg,
                               IngestReport& rep) {
    io::LineReader in(path);
    std::string line;
    if (!in.next(line)) throw DataError(path + ": empty book file");

    std::vector<std::string_view> cols;
    io::split_csv(line, cols);
    if (cols.size() < 5 || cols[0] != "ts_ms" || (cols.size() - 1) % 4 != 0)
        throw DataError(path + ": bad book header '" + line + "'");
    const int file_levels = static_cast<int>((cols.size() - 1) / 4);
    const int levels = std::min(file_levels, cfg.depth_levels);

    std::vector<BookRow> rows;
    std::int64_t prev_ts = std::numeric_limits<std::int64_t>::min();
    while (in.next(line)) {
        io::split_csv(line, cols);
        if (cols.size() != 1 + 4 * static_cast<std::size_t>(file_levels))
            throw DataError(path + ":" + std::to_string(in.line_no()) +
                            ": expected " + std::to_string(1 + 4 * file_levels) +
                            " columns, got " + std::to_string(cols.size()));
        ++rep.book_rows_read;
        BookRow r;
        try {
            r.ts_ms = io::parse_i64(cols[0]);
            for (int l = 0; l < levels; ++l) {
                r.bid_px.push_back(to_ticks(io::parse_double(cols[1 + 4 * l]), cfg.tick));
                r.bid_qty.push_back(io::parse_double(cols[2 + 4 * l]));
                r.ask_px.push_back(to_ticks(io::parse_double(cols[3 + 4 * l]), cfg.tick));
                r.ask_qty.push_back(io::parse_double(cols[4 + 4 * l]));
            }
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(in.line_no()) + ": " + e.what());
        }
        if (r.ts_ms < prev_ts)
            throw DataError(path + ":" + std::to_string(in.line_no()) +
                            ": timestamps decrease");
        prev_ts = r.ts_ms;

        if (r.ask_px[0] <= r.bid_px[0]) {
            ++rep.book_rows_crossed;
            continue;
        }
        bool ok = r.bid_px[0] > 0 && r.bid_qty[0] > 0.0 && r.ask_qty[0] > 0.0;
        for (int l = 0; ok && l < levels; ++l) {
            if (r.bid_qty[l] < 0.0 || r.ask_qty[l] < 0.0) ok = false;
            if (l > 0 && (r.bid_px[l] >= r.bid_px[l - 1] || r.ask_px[l] <= r.ask_px[l - 1]))
                ok = false;
        }
        if (!ok) {
            ++rep.book_rows_invalid;
            continue;
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<Trade> read_trades(const std::string& path, const IngestConfig& cfg,
                               IngestReport& rep) {
    io::LineReader in(path);
    std::string line;
    if (!in.next(line)) throw DataError(path + ": empty trades file");
    if (line != "ts_ms,price,qty,side")
        throw DataError(path + ": bad trades header '" + line + "'");

    std::vector<std::string_view> cols;
    std::vector<Trade> trades;
    std::int64_t prev_ts = std::numeric_limits<std::int64_t>::min();
    while (in.next(line)) {
        io::split_csv(line, cols);
        const auto fail = [&](const std::string& why) {
            return DataError(path + ":" + std::to_string(in.line_no()) + ": " + why);
        };
        if (cols.size() != 4) throw fail("expected 4 columns");
        ++rep.trades_read;
        Trade t;
        double price = 0.0;
        try {
            t.ts_ms = io::parse_i64(cols[0]);
            price = io::parse_double(cols[1]);
            t.qty = io::parse_double(cols[2]);
        } catch (const DataError& e) {
            throw fail(e.what());
        }
        if (cols[3] == "B")
            t.side = +1;
        else if (cols[3] == "S")
            t.side = -1;
        else
            throw fail("side must be B or S, got '" + std::string(cols[3]) + "'");
        if (price <= 0.0) throw fail("price must be positive");
        if (t.qty <= 0.0) throw fail("qty must be positive");
        if (t.ts_ms < prev_ts) throw fail("timestamps decrease");
        prev_ts = t.ts_ms;
        t.px = to_ticks(price, cfg.tick);
        trades.push_back(t);
    }
    return trades;
}

}  // namespace

BookSnapshot AlignedSeries::snapshot(std::size_t i) const {
    BookSnapshot s;
    s.ts_ms = src_ts_ms[i];
    const std::size_t off = i * static_cast<std::size_t>(depth);
    s.bid_px.assign(bid_px.begin() + off, bid_px.begin() + off + depth);
    s.ask_px.assign(ask_px.begin() + off, ask_px.begin() + off + depth);
    s.bid_qty.assign(bid_qty.begin() + off, bid_qty.begin() + off + depth);
    s.ask_qty.assign(ask_qty.begin() + off, ask_qty.begin() + off + depth);
    return s;
}

double mid(const BookSnapshot& s, double tick) {
    return 0.5 * tick * static_cast<double>(s.bid_px[0] + s.ask_px[0]);
}

std::vector<double> label(const AlignedSeries& s, int horizon_s) {
    const std::size_t n = s.size();
    const auto h = static_cast<std::size_t>(horizon_s);
    std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t t = 0; t + h < n; ++t) {
        if (!s.valid[t] || !s.valid[t + h]) continue;
        out[t] = std::log(s.mid_price(t + h) / s.mid_price(t));
    }
    return out;
}

AlignedSeries ingest(const std::string& book_path, const std::string& trades_path,
                     const IngestConfig& cfg, IngestReport* report) {
    IngestReport rep;
    const auto books = read_book(book_path, cfg, rep);
    const auto trades = read_trades(trades_path, cfg, rep);
    if (books.empty() || trades.empty())
        throw DataError("empty time intersection between " + book_path + " and " +
                        trades_path);

    // A book state stays usable for max_ffill_ms past its timestamp, so the
    // grid may extend that far beyond the last quote but never beyond the
    // last trade's bucket (a trade at 12:00:00.7 covers the bucket ending
    // 12:00:01).
    const std::int64_t lo = std::max(books.front().ts_ms, trades.front().ts_ms);
    const std::int64_t hi = std::min(books.back().ts_ms + cfg.max_ffill_ms,
                                     (trades.back().ts_ms + 999) / 1000 * 1000);
    const std::int64_t s_first = (lo + 999) / 1000;  // timestamps are nonnegative
    const std::int64_t s_last = hi / 1000;
    if (s_first > s_last)
        throw DataError("empty time intersection between " + book_path + " and " +
                        trades_path);

    AlignedSeries out;
    out.tick = cfg.tick;
    out.depth = static_cast<int>(books.front().bid_px.size());
    const auto n = static_cast<std::size_t>(s_last - s_first + 1);
    const auto d = static_cast<std::size_t>(out.depth);
    out.grid_ts.resize(n);
    out.src_ts_ms.resize(n);
    out.valid.resize(n);
    out.bid_px.resize(n * d);
    out.ask_px.resize(n * d);
    out.bid_qty.resize(n * d);
    out.ask_qty.resize(n * d);

    std::size_t bi = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t s = s_first + static_cast<std::int64_t>(i);
        const std::int64_t t_ms = s * 1000;
        while (bi + 1 < books.size() && books[bi + 1].ts_ms <= t_ms) ++bi;
        const BookRow& b = books[bi];
        out.grid_ts[i] = s;
        out.src_ts_ms[i] = b.ts_ms;
        const std::int64_t gap = t_ms - b.ts_ms;
        out.valid[i] = gap <= cfg.max_ffill_ms ? 1 : 0;
        if (!out.valid[i]) ++rep.stale_points;
        rep.max_fill_gap_ms = std::max(rep.max_fill_gap_ms, gap);
        std::copy_n(b.bid_px.begin(), d, out.bid_px.begin() + i * d);
        std::copy_n(b.ask_px.begin(), d, out.ask_px.begin() + i * d);
        std::copy_n(b.bid_qty.begin(), d, out.bid_qty.begin() + i * d);
        std::copy_n(b.ask_qty.begin(), d, out.ask_qty.begin() + i * d);
    }

    // Bucket t covers (t-1s, t]; trades outside the grid span are counted,
    // never silently dropped.
    out.bucket_begin.assign(n + 1, 0);
    for (const Trade& t : trades) {
        const std::int64_t s = (t.ts_ms + 999) / 1000;
        if (s < s_first || s > s_last) {
            ++rep.trades_out_of_range;
            continue;
        }
        ++out.bucket_begin[static_cast<std::size_t>(s - s_first) + 1];
        out.trades.push_back(t);
    }
    for (std::size_t i = 1; i <= n; ++i) out.bucket_begin[i] += out.bucket_begin[i - 1];

    rep.grid_points = n;
    for (std::size_t i = 0; i < n; ++i)
        if (out.valid[i]) ++rep.valid_points;
    if (report) *report = rep;
    return out;
}

void serialize(const AlignedSeries& s, const std::string& book_path,
               const std::string& trades_path) {
    const auto d = static_cast<std::size_t>(s.depth);
    {
        io::LineWriter out(book_path);
        std::string line = "ts_ms";
        for (std::size_t l = 0; l < d; ++l) {
            const std::string i = std::to_string(l);
            line += ",bid_px_" + i + ",bid_qty_" + i + ",ask_px_" + i + ",ask_qty_" + i;
        }
        out.write(line);
        for (std::size_t i = 0; i < s.size(); ++i) {
            line = std::to_string(s.grid_ts[i] * 1000);
            for (std::size_t l = 0; l < d; ++l) {
                line += ',';
                io::append_double(line, static_cast<double>(s.bid_px[i * d + l]) * s.tick);
                line += ',';
                io::append_double(line, s.bid_qty[i * d + l]);
                line += ',';
                io::append_double(line, static_cast<double>(s.ask_px[i * d + l]) * s.tick);
                line += ',';
                io::append_double(line, s.ask_qty[i * d + l]);
            }
            out.write(line);
        }
        out.close();
    }
    {
        io::LineWriter out(trades_path);
        out.write("ts_ms,price,qty,side");
        std::string line;
        for (const Trade& t : s.trades) {
            line = std::to_string(t.ts_ms);
            line += ',';
            io::append_double(line, static_cast<double>(t.px) * s.tick);
            line += ',';
            io::append_double(line, t.qty);
            line += t.side > 0 ? ",B" : ",S";
            out.write(line);
        }
        out.close();
    }
}

}  // namespace ticklab::md
