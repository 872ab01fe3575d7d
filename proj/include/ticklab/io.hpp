#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ticklab::io {

// Line-oriented text input. Reads gzip and plain files alike (zlib's gz
// layer passes uncompressed data through), strips trailing \n and \r.
class LineReader {
  public:
    explicit LineReader(const std::string& path);
    ~LineReader();
    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;

    // False at end of file. `line_no()` names the line just returned, 1-based.
    bool next(std::string& line);
    std::size_t line_no() const { return line_no_; }
    const std::string& path() const { return path_; }

  private:
    void* gz_ = nullptr;
    std::string path_;
    std::size_t line_no_ = 0;
};

// Line-oriented text output; compresses when the path ends in ".gz".
class LineWriter {
  public:
    explicit LineWriter(const std::string& path);
    ~LineWriter();
    LineWriter(const LineWriter&) = delete;
    LineWriter& operator=(const LineWriter&) = delete;

    void write(std::string_view line);  // appends '\n'
    void close();

  private:
    void* gz_ = nullptr;
    void* plain_ = nullptr;
    std::string path_;
};

bool has_gz_suffix(std::string_view path);

// Shortest exact decimal form: %.17g always round-trips a double.
void append_double(std::string& out, double v);
std::string fmt_double(double v);

// Strict numeric parsing; DataError with the offending text on failure.
double parse_double(std::string_view s);
std::int64_t parse_i64(std::string_view s);

// Splits on commas; no quoting (none of the formats here need it).
void split_csv(std::string_view line, std::vector<std::string_view>& out);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace ticklab::io
