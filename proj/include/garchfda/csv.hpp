#pragma once

/// Minimal CSV support for the fixed schemas this project reads and writes.
/// Comma separated, first row is the header, no quoting (none of the schemas
/// carry free text that could contain a comma). Doubles are formatted with
/// enough digits to round-trip exactly, which is what makes re-runs of the
/// same fit byte-identical.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "garchfda/common.hpp"

namespace garchfda::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // ragged rows are the caller's problem to reject
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline Table parse(std::istream& in) {
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      t.header = split_line(line);
      first = false;
    } else {
      t.rows.push_back(split_line(line));
    }
  }
  return t;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  return parse(in);
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

inline void write_file(const std::string& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << join(header) << '\n';
  for (const auto& r : rows) out << join(r) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace garchfda::csv
