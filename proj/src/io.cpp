#include "sskernel/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace sskernel::io {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(trim(field));
  return out;
}

double parse_double(const std::string& field, Eigen::Index line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" + field +
                     "' as a number");
  }
}

}  // namespace

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ParseError("expected a matrix as an array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) throw ParseError("ragged matrix rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw ParseError("matrix entries must be numbers");
      m(i, c) = j[i][c].get<double>();
    }
  }
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ParseError("expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!j[i].is_number()) throw ParseError("array entries must be numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

nlohmann::json band_to_json(const PartialBandMatrix<double>& p) {
  nlohmann::json diagonals = nlohmann::json::array();
  for (const auto& d : p.diagonals()) diagonals.push_back(vector_to_json(d));
  return {{"n", p.order()}, {"m", p.bandwidth()}, {"diagonals", std::move(diagonals)}};
}

PartialBandMatrix<double> band_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("band matrix: expected a JSON object");
  for (const char* key : {"n", "m", "diagonals"})
    if (!j.contains(key)) throw ParseError(std::string("band matrix: missing key '") + key + "'");
  if (!j["n"].is_number_integer() || !j["m"].is_number_integer())
    throw ParseError("band matrix: n and m must be integers");
  const Eigen::Index n = j["n"].get<Eigen::Index>();
  const Eigen::Index m = j["m"].get<Eigen::Index>();
  if (n < 1 || m < 0 || m >= n) throw ParseError("band matrix: need n >= 1 and 0 <= m < n");
  const auto& diagonals = j["diagonals"];
  if (!diagonals.is_array() || static_cast<Eigen::Index>(diagonals.size()) != m + 1)
    throw ParseError("band matrix: expected m + 1 diagonals");
  PartialBandMatrix<double> p(n, m);
  for (Eigen::Index d = 0; d <= m; ++d) {
    const Eigen::VectorXd values = vector_from_json(diagonals[d]);
    if (values.size() != n - d)
      throw ParseError("band matrix: diagonal " + std::to_string(d) + " must hold " +
                       std::to_string(n - d) + " values");
    for (Eigen::Index i = 0; i + d < n; ++i) p.set(i, i + d, values[i]);
  }
  return p;
}

SysIdDataset dataset_from_csv(std::istream& in) {
  SysIdDataset data;
  std::string line;
  Eigen::Index line_no = 0;
  bool header_seen = false;
  int col_t = -1, col_u = -1, col_y = -1;
  std::vector<double> u, y;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text[0] == '#') {
      const auto eq = text.find("seed=");
      if (eq != std::string::npos) {
        try {
          data.seed = std::stoull(text.substr(eq + 5));
        } catch (const std::exception&) {
          throw ParseError("line " + std::to_string(line_no) + ": malformed seed comment");
        }
      }
      continue;
    }
    const auto fields = split(text, ',');
    if (!header_seen) {
      for (int c = 0; c < static_cast<int>(fields.size()); ++c) {
        if (fields[c] == "t") col_t = c;
        if (fields[c] == "u") col_u = c;
        if (fields[c] == "y") col_y = c;
      }
      for (const auto& [col, name] : {std::pair{col_t, "t"}, {col_u, "u"}, {col_y, "y"}})
        if (col < 0) throw ParseError(std::string("missing column '") + name + "' in the CSV header");
      header_seen = true;
      continue;
    }
    const int needed = std::max({col_t, col_u, col_y});
    if (static_cast<int>(fields.size()) <= needed)
      throw ParseError("line " + std::to_string(line_no) + ": expected at least " +
                       std::to_string(needed + 1) + " fields");
    u.push_back(parse_double(fields[col_u], line_no));
    y.push_back(parse_double(fields[col_y], line_no));
  }
  if (!header_seen) throw ParseError("empty dataset: no header line found");
  if (u.empty()) throw ParseError("dataset holds no samples");
  data.u = Eigen::Map<Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
  data.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  return data;
}

void dataset_to_csv(std::ostream& out, const SysIdDataset& data) {
  if (data.seed) out << "# seed=" << *data.seed << "\n";
  out << "t,u,y\n";
  char buf_u[40], buf_y[40];
  for (Eigen::Index t = 0; t < data.y.size(); ++t) {
    std::snprintf(buf_u, sizeof(buf_u), "%.17g", data.u[t]);
    std::snprintf(buf_y, sizeof(buf_y), "%.17g", data.y[t]);
    out << (t + 1) << ',' << buf_u << ',' << buf_y << "\n";
  }
}

nlohmann::json estimate_to_json(const ImpulseEstimate& estimate) {
  return {{"alpha", estimate.hyperparams.alpha},
          {"lambda", estimate.hyperparams.lambda},
          {"sigma2", estimate.hyperparams.sigma2},
          {"objective", estimate.objective},
          {"f_hat", vector_to_json(estimate.f_hat)}};
}

nlohmann::json kernel_report(const StableSplineKernel<double>& kernel) {
  const TridiagInverse<double> inverse = inverse_closed_form(kernel);
  return {{"n", kernel.n},
          {"alpha", kernel.alpha},
          {"lambda", kernel.lambda},
          {"logdet", log_det(kernel)},
          {"K", matrix_to_json(build_kernel(kernel))},
          {"w", vector_to_json(factorize(kernel).w)},
          {"inverse", {{"diag", vector_to_json(inverse.diag)}, {"offdiag", vector_to_json(inverse.offdiag)}}}};
}

nlohmann::json completion_report(const PartialBandMatrix<double>& p) {
  const Eigen::MatrixXd extension = central_extension(p);
  const BandFactorization<double> factors = factored_extension(p);
  // det C = 1 / det(L V L^T) and L is unit triangular
  const double logdet = -factors.v.array().log().sum();
  return {{"n", p.order()},
          {"m", p.bandwidth()},
          {"matrix", matrix_to_json(extension)},
          {"L", matrix_to_json(factors.lower)},
          {"V", vector_to_json(factors.v)},
          {"logdet", logdet}};
}

void matrix_to_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  char buf[40];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
}

Eigen::MatrixXd matrix_from_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  Eigen::Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    std::vector<double> row;
    for (const auto& field : split(text, ',')) row.push_back(parse_double(field, line_no));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError("line " + std::to_string(line_no) + ": ragged matrix rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("empty matrix CSV");
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << contents;
}

}  // namespace sskernel::io
