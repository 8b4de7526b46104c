#include "bipolar/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace bipolar {
namespace {

std::string header_line(const std::vector<Column>& columns) {
  std::string s;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) s += ',';
    s += csv_quote(columns[i].name);
  }
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// First non-comment line of the file, or empty.
std::string first_data_line(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    return line;
  }
  return {};
}

}  // namespace

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

SeriesWriter::SeriesWriter(std::string path, std::vector<Column> columns, const Comments& comments, bool append)
    : path_(std::move(path)), width_(columns.size()) {
  const std::string header = header_line(columns);
  const bool resume = append && std::filesystem::exists(path_) && std::filesystem::file_size(path_) > 0;
  if (resume) {
    const std::string existing = first_data_line(path_);
    if (existing != header) {
      throw std::runtime_error(path_ + ": cannot append, column header differs (found '" + existing + "')");
    }
    out_.open(path_, std::ios::app);
    check("open for append");
    return;
  }
  out_.open(path_, std::ios::trunc);
  check("open");
  for (const auto& [key, value] : comments) out_ << "# " << key << ": " << value << '\n';
  out_ << "# units:";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out_ << (i ? ", " : " ") << columns[i].name << " [" << (columns[i].unit.empty() ? "1" : columns[i].unit) << "]";
  }
  out_ << '\n' << header << '\n';
  check("write header");
}

SeriesWriter::~SeriesWriter() {
  if (out_.is_open()) out_.flush();
}

void SeriesWriter::check(const char* what) {
  if (!out_) {
    throw std::runtime_error(path_ + ": " + what + " failed: " + std::strerror(errno));
  }
}

void SeriesWriter::row(const std::vector<double>& values) {
  if (values.size() != width_) {
    throw std::invalid_argument(path_ + ": row has " + std::to_string(values.size()) + " values, expected " +
                                std::to_string(width_));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out_ << ',';
    out_ << format_double(values[i]);
  }
  out_ << '\n';
  check("write row");
  ++rows_;
}

void SeriesWriter::mark_truncated(const std::string& reason) {
  out_ << "# TRUNCATED: " << reason << '\n';
  flush();
}

void SeriesWriter::flush() {
  out_.flush();
  check("flush");
}

void SeriesWriter::close() {
  if (!out_.is_open()) return;
  flush();
  out_.close();
}

void write_series(const std::string& path, const std::vector<Column>& columns,
                  const std::vector<std::vector<double>>& rows, const SeriesWriter::Comments& comments) {
  SeriesWriter w(path, columns, comments);
  for (const auto& r : rows) w.row(r);
  w.close();
}

std::vector<std::string> read_series_header(const std::string& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error(path + ": no such file");
  return split_csv(first_data_line(path));
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << text;
  out.flush();
  if (!out) throw std::runtime_error(path + ": write failed: " + std::strerror(errno));
}

}  // namespace bipolar
