#include <chi2/curve_io.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace chi2 {

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
  if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf.data(), res.ptr);
}

namespace {

bool parse_fields(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ',' || line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ',' && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    double v = 0;
    const auto res = std::from_chars(line.data() + i, line.data() + j, v);
    if (res.ec != std::errc() || res.ptr != line.data() + j) return false;
    out.push_back(v);
    i = j;
  }
  return true;
}

}  // namespace

CorrelationCurve read_curve(std::istream& in) {
  CorrelationCurve c;
  std::string line;
  std::vector<double> f;
  bool first_data = true;
  int columns = 0;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    if (!parse_fields(line, f)) {
      if (first_data) {
        first_data = false;  // column-name row
        continue;
      }
      throw std::invalid_argument("read_curve: bad number on line " + std::to_string(lineno));
    }
    first_data = false;
    if (f.size() != 2 && f.size() != 3) {
      throw std::invalid_argument("read_curve: expected 2 or 3 columns on line " + std::to_string(lineno));
    }
    if (columns == 0) columns = static_cast<int>(f.size());
    if (static_cast<int>(f.size()) != columns) {
      throw std::invalid_argument("read_curve: inconsistent column count on line " + std::to_string(lineno));
    }
    c.tau.push_back(f[0]);
    c.g2.push_back(f[1]);
    if (columns == 3) c.sigma.push_back(f[2]);
  }
  c.validate();
  return c;
}

CorrelationCurve read_curve_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("read_curve_file: cannot open " + path.string());
  return read_curve(in);
}

void write_curve(std::ostream& out, const CorrelationCurve& curve, std::string_view header) {
  std::istringstream hs{std::string(header)};
  std::string line;
  while (std::getline(hs, line)) out << "# " << line << '\n';
  out << (curve.has_sigma() ? "tau_s,g2,sigma\n" : "tau_s,g2\n");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out << format_double(curve.tau[i]) << ',' << format_double(curve.g2[i]);
    if (curve.has_sigma()) out << ',' << format_double(curve.sigma[i]);
    out << '\n';
  }
}

}  // namespace chi2
