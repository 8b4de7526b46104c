#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace bipolar {

struct Column {
  std::string name;
  std::string unit;
};

/// Streaming CSV writer. The file starts with a block of "# key: value"
/// comment lines, a "# units:" line and the column header; rows are written
/// as they arrive and nothing is buffered beyond the stream buffer.
///
/// Opening an existing file in append mode checks that its column header
/// matches and continues after the last row.
class SeriesWriter {
 public:
  using Comments = std::vector<std::pair<std::string, std::string>>;

  SeriesWriter(std::string path, std::vector<Column> columns, const Comments& comments = {}, bool append = false);
  SeriesWriter(const SeriesWriter&) = delete;
  SeriesWriter& operator=(const SeriesWriter&) = delete;
  SeriesWriter(SeriesWriter&&) = default;
  SeriesWriter& operator=(SeriesWriter&&) = default;
  ~SeriesWriter();

  void row(const std::vector<double>& values);
  /// Appends "# TRUNCATED: reason" and flushes.
  void mark_truncated(const std::string& reason);
  void flush();
  void close();

  const std::string& path() const { return path_; }
  std::size_t rows() const { return rows_; }

 private:
  void check(const char* what);

  std::string path_;
  std::size_t width_ = 0;
  std::size_t rows_ = 0;
  std::ofstream out_;
};

/// One-shot form of SeriesWriter.
void write_series(const std::string& path, const std::vector<Column>& columns,
                  const std::vector<std::vector<double>>& rows, const SeriesWriter::Comments& comments = {});

/// Column names of a CSV written by SeriesWriter.
std::vector<std::string> read_series_header(const std::string& path);

/// CSV field quoting for names containing separators or quotes.
std::string csv_quote(const std::string& s);

/// Shortest round-trip decimal form of a double (always "%.17g").
std::string format_double(double v);

/// Writes text to path, throwing std::runtime_error with the path on failure.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace bipolar
