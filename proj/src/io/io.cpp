#include "ticklab/io.hpp"

#include <zlib.h>

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ticklab/errors.hpp"

namespace ticklab::io {

LineReader::LineReader(const std::string& path) : path_(path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw DataError("cannot open " + path + ": " + std::strerror(errno));
    gzbuffer(f, 1 << 16);
    gz_ = f;
}

LineReader::~LineReader() {
    if (gz_) gzclose(static_cast<gzFile>(gz_));
}

bool LineReader::next(std::string& line) {
    gzFile f = static_cast<gzFile>(gz_);
    line.clear();
    char buf[4096];
    bool got = false;
    while (gzgets(f, buf, sizeof(buf))) {
        got = true;
        line.append(buf);
        if (!line.empty() && line.back() == '\n') break;
    }
    if (!got) {
        int err = 0;
        const char* msg = gzerror(f, &err);
        if (err != Z_OK && err != Z_STREAM_END)
            throw DataError(path_ + ": read error: " + (msg ? msg : "?"));
        return false;
    }
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    ++line_no_;
    return true;
}

LineWriter::LineWriter(const std::string& path) : path_(path) {
    if (has_gz_suffix(path)) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (!f) throw DataError("cannot open " + path + " for writing: " + std::strerror(errno));
        gz_ = f;
    } else {
        auto* f = new std::ofstream(path, std::ios::binary);
        if (!*f) {
            delete f;
            throw DataError("cannot open " + path + " for writing: " + std::strerror(errno));
        }
        plain_ = f;
    }
}

LineWriter::~LineWriter() { close(); }

void LineWriter::write(std::string_view line) {
    if (gz_) {
        gzFile f = static_cast<gzFile>(gz_);
        if (!line.empty() &&
            gzwrite(f, line.data(), static_cast<unsigned>(line.size())) !=
                static_cast<int>(line.size()))
            throw DataError(path_ + ": short write");
        if (gzwrite(f, "\n", 1) != 1) throw DataError(path_ + ": short write");
    } else if (plain_) {
        auto* f = static_cast<std::ofstream*>(plain_);
        f->write(line.data(), static_cast<std::streamsize>(line.size()));
        f->put('\n');
        if (!*f) throw DataError(path_ + ": write failed");
    }
}

void LineWriter::close() {
    if (gz_) {
        gzclose(static_cast<gzFile>(gz_));
        gz_ = nullptr;
    }
    if (plain_) {
        auto* f = static_cast<std::ofstream*>(plain_);
        f->close();
        const bool ok = !f->fail();
        delete f;
        plain_ = nullptr;
        if (!ok) throw DataError(path_ + ": close failed");
    }
}

bool has_gz_suffix(std::string_view path) {
    return path.size() > 3 && path.substr(path.size() - 3) == ".gz";
}

void append_double(std::string& out, double v) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
    out.append(buf, static_cast<std::size_t>(n));
}

std::string fmt_double(double v) {
    std::string s;
    append_double(s, v);
    return s;
}

double parse_double(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw DataError("bad number: '" + std::string(s) + "'");
    return v;
}

std::int64_t parse_i64(std::string_view s) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw DataError("bad integer: '" + std::string(s) + "'");
    return v;
}

void split_csv(std::string_view line, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path + ": " + std::strerror(errno));
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path + " for writing: " + std::strerror(errno));
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw DataError(path + ": write failed");
}

}  // namespace ticklab::io
