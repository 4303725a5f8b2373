#pragma once

#include "sskernel/band_completion.hpp"
#include "sskernel/sysid.hpp"

#include <json.hpp>

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace sskernel::io {

/// Input that fails syntax or schema validation.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

/// Band matrix schema: {"n": int, "m": int, "diagonals": [[...], ...]} with
/// diagonals[d] holding the n-d values at offset d, main diagonal first.
nlohmann::json band_to_json(const PartialBandMatrix<double>& p);
PartialBandMatrix<double> band_from_json(const nlohmann::json& j);

/// Dataset CSV: optional "# key=value" comment lines (seed, sigma2), then a
/// "t,u,y" header, then one row per sample.
SysIdDataset dataset_from_csv(std::istream& in);
void dataset_to_csv(std::ostream& out, const SysIdDataset& data);

nlohmann::json estimate_to_json(const ImpulseEstimate& estimate);

/// Kernel inspection report: K, W, the tridiagonal inverse and the
/// log-determinant.
nlohmann::json kernel_report(const StableSplineKernel<double>& kernel);

/// Completion report: the central extension, its banded inverse factors
/// (L, V) and the attained log-determinant.
nlohmann::json completion_report(const PartialBandMatrix<double>& p);

/// Matrix CSV with 17 significant digits (value-exact round trip).
void matrix_to_csv(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_csv(std::istream& in);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace sskernel::io
