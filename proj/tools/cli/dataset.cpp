#include "cli/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "cli/format.hpp"

namespace drest::cli {

DataError::DataError(std::size_t row, const std::string& message)
    : std::runtime_error(row > 0 ? "data line " + std::to_string(row) + ": " + message : "data: " + message),
      row_(row) {}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::optional<double> parse_number(const std::string& text) {
  double v = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::vector<std::size_t> Dataset::columns(const std::vector<std::string>& names) const {
  std::vector<std::size_t> out;
  for (const auto& name : names) {
    const auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end()) throw DataError(0, "no covariate column named '" + name + "'");
    out.push_back(static_cast<std::size_t>(it - covariate_names.begin()));
  }
  return out;
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    header = split(line);
    break;
  }
  if (header.empty()) throw DataError(0, "empty file");

  std::ptrdiff_t t_col = -1, y_col = -1;
  Dataset data;
  std::vector<std::size_t> x_cols;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name = trim(header[j]);
    if (name.empty()) throw DataError(lineno, "empty column name");
    if (name == "t") {
      t_col = static_cast<std::ptrdiff_t>(j);
    } else if (name == "y") {
      y_col = static_cast<std::ptrdiff_t>(j);
    } else {
      if (std::find(data.covariate_names.begin(), data.covariate_names.end(), name) != data.covariate_names.end()) {
        throw DataError(lineno, "duplicate column '" + name + "'");
      }
      data.covariate_names.push_back(name);
      x_cols.push_back(j);
    }
  }
  if (t_col < 0 || y_col < 0) throw DataError(lineno, "header must name columns t and y");

  std::vector<double> ts, ys, xs;
  std::size_t ignored = 0, first_ignored = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw DataError(lineno, "expected " + std::to_string(header.size()) + " fields, found " +
                                  std::to_string(fields.size()));
    }
    const auto t = parse_number(trim(fields[static_cast<std::size_t>(t_col)]));
    if (!t || (*t != 0.0 && *t != 1.0)) throw DataError(lineno, "t must be 0 or 1");
    const std::string y_text = trim(fields[static_cast<std::size_t>(y_col)]);
    double y = std::numeric_limits<double>::quiet_NaN();
    if (*t == 1.0) {
      const auto v = parse_number(y_text);
      if (!v) throw DataError(lineno, y_text.empty() ? "y missing where t = 1" : "y is not a finite number");
      y = *v;
    } else if (!y_text.empty()) {
      if (ignored++ == 0) first_ignored = lineno;
    }
    for (std::size_t c : x_cols) {
      const auto v = parse_number(trim(fields[c]));
      if (!v) throw DataError(lineno, "column '" + trim(header[c]) + "' is not a finite number");
      xs.push_back(*v);
    }
    ts.push_back(*t);
    ys.push_back(y);
  }
  if (ts.empty()) throw DataError(0, "no data rows");
  if (ignored > 0) {
    data.warnings.push_back("y present where t = 0 on " + std::to_string(ignored) + " row(s), first at line " +
                            std::to_string(first_ignored) + "; values ignored");
  }

  const auto n = static_cast<Eigen::Index>(ts.size());
  const auto p = static_cast<Eigen::Index>(x_cols.size());
  data.t = Eigen::Map<const Eigen::VectorXd>(ts.data(), n);
  data.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), n);
  data.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(xs.data(), n, p);
  return data;
}

Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(0, "cannot open '" + path + "'");
  return read_dataset(in);
}

void write_dataset(std::ostream& out, const FullSample& sample, CovariateView view) {
  std::vector<const Eigen::MatrixXd*> blocks;
  std::vector<char> prefixes;
  if (view != CovariateView::observed) blocks.push_back(&sample.z), prefixes.push_back('z');
  if (view != CovariateView::latent) blocks.push_back(&sample.x), prefixes.push_back('x');
  out << "t,y";
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (Eigen::Index j = 0; j < blocks[b]->cols(); ++j) out << ',' << prefixes[b] << j + 1;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < sample.t.size(); ++i) {
    const bool responded = sample.t[i] == 1.0;
    out << (responded ? '1' : '0') << ',';
    if (responded) out << format_double(sample.y[i]);
    for (const auto* b : blocks) {
      for (Eigen::Index j = 0; j < b->cols(); ++j) out << ',' << format_double((*b)(i, j));
    }
    out << '\n';
  }
}

std::vector<double> read_values(std::istream& in, const std::optional<std::string>& select) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> out;
  bool simulate_layout = false;
  std::string want_scenario, want_n, want_name;
  if (select) {
    const auto a = select->find(':');
    const auto b = a == std::string::npos ? a : select->find(':', a + 1);
    if (b == std::string::npos) throw DataError(0, "selector must look like scenario:n:ESTIMATOR");
    want_scenario = select->substr(0, a);
    want_n = select->substr(a + 1, b - a - 1);
    want_name = select->substr(b + 1);
  }
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (trim(line) == "scenario,n,estimator,replication,value") {
        simulate_layout = true;
        if (!select) throw DataError(lineno, "simulate values file needs a selector (--select scenario:n:ESTIMATOR)");
        continue;
      }
      if (trim(line) == "value") continue;
    }
    if (simulate_layout) {
      const auto f = split(line);
      if (f.size() != 5) throw DataError(lineno, "expected 5 fields");
      if (f[0] != want_scenario || f[1] != want_n || f[2] != want_name) continue;
      const auto v = parse_number(trim(f[4]));
      if (!v) throw DataError(lineno, "value is not a finite number");
      out.push_back(*v);
    } else {
      const auto v = parse_number(trim(line));
      if (!v) throw DataError(lineno, "value is not a finite number");
      out.push_back(*v);
    }
  }
  if (!header_seen) throw DataError(0, "empty file");
  if (out.empty()) throw DataError(0, select ? "selector matched no values" : "no values");
  return out;
}

}  // namespace drest::cli
