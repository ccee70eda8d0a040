#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rarts {

// Fixed-format double rendering so identical runs produce identical bytes.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline void write_csv(const std::string& path, const CsvTable& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < t.header.size(); ++i)
    out << (i ? "," : "") << t.header[i];
  out << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << fmt_double(row[i]);
    out << "\n";
  }
}

struct CsvParseError : std::runtime_error {
  std::size_t line;
  CsvParseError(const std::string& msg, std::size_t ln)
      : std::runtime_error(msg + " (line " + std::to_string(ln) + ")"), line(ln) {}
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (lineno == 1) {
      while (std::getline(ss, cell, ',')) t.header.push_back(cell);
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw CsvParseError("malformed numeric field '" + cell + "'", lineno);
      }
    }
    if (row.size() != t.header.size())
      throw CsvParseError("row has " + std::to_string(row.size()) +
                              " fields, header has " + std::to_string(t.header.size()),
                          lineno);
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw CsvParseError("missing header", 0);
  return t;
}

}  // namespace rarts
