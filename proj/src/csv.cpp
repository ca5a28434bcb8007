#include "nvsim/csv.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nvsim {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

}  // namespace

TimeTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trace CSV: " + path);
  // header row is required but its labels are not interpreted
  std::vector<double> times, values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < 2)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected two columns");
    try {
      times.push_back(std::stod(cells[0]));
      values.push_back(std::stod(cells[1]));
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return TimeTrace::sampled(std::move(times), std::move(values));
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write: " + tmp);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out << ',';
      const std::string& h = header[i];
      if (h.find_first_of(",\"\n") != std::string::npos) {
        out << '"';
        for (char c : h) {
          if (c == '"') out << "\"\"";
          else out << c;
        }
        out << '"';
      } else {
        out << h;
      }
    }
    out << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << format_double(row[i]);
      }
      out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace nvsim
