#pragma once

#include "eofdual/purity.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace eofdual {

using Json = nlohmann::ordered_json;

/// Malformed input document.  field() names the offending schema field.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string field, const std::string& message)
      : std::runtime_error(detail::concat("schema error at '", field, "': ", message)), field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kJsonHermiticityTolerance = 1e-9;

// ---------------------------------------------------------------------------
// files

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(detail::concat("cannot open '", path, "'"));
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("<document>", e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(detail::concat("cannot write '", path, "'"));
  out << text;
  if (!out) throw IoError(detail::concat("write failed for '", path, "'"));
}

// ---------------------------------------------------------------------------
// matrices

namespace detail {

inline const Json& require_field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

inline int require_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  return j.get<int>();
}

inline Complex parse_entry(const Json& e, const std::string& path) {
  if (e.is_number()) return {e.get<double>(), 0.0};
  if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
    return {e[0].get<double>(), e[1].get<double>()};
  }
  throw SchemaError(path, "expected [re, im] or a number");
}

/// Rows of [re, im] pairs, row-major.  Only rectangularity is checked here.
inline Matrix parse_matrix_rows(const Json& rows, const std::string& path) {
  if (!rows.is_array() || rows.empty()) throw SchemaError(path, "expected a non-empty array of rows");
  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  if (!rows[0].is_array()) throw SchemaError(path + "[0]", "expected an array");
  const auto n_cols = static_cast<Eigen::Index>(rows[0].size());
  Matrix m(n_rows, n_cols);
  for (Eigen::Index i = 0; i < n_rows; ++i) {
    const std::string rp = concat(path, "[", i, "]");
    if (!rows[i].is_array() || static_cast<Eigen::Index>(rows[i].size()) != n_cols) {
      throw SchemaError(rp, concat("expected ", n_cols, " entries"));
    }
    for (Eigen::Index j = 0; j < n_cols; ++j) m(i, j) = parse_entry(rows[i][j], concat(rp, "[", j, "]"));
  }
  return m;
}

inline Json matrix_rows(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline Json dims_to_json(const BipartiteDims& d) { return Json{{"dA", d.dim_a}, {"dB", d.dim_b}, {"copies", d.copies}}; }

inline BipartiteDims dims_from_json(const Json& j, const std::string& path = "dims") {
  const int da = detail::require_int(detail::require_field(j, "dA", path), path + ".dA");
  const int db = detail::require_int(detail::require_field(j, "dB", path), path + ".dB");
  int copies = 1;
  if (j.contains("copies")) copies = detail::require_int(j["copies"], path + ".copies");
  try {
    return {da, db, copies};
  } catch (const std::exception& e) {
    throw SchemaError(path, e.what());
  }
}

inline Json operator_to_json(const BipartiteDims& dims, const Matrix& m) {
  return Json{{"dims", dims_to_json(dims)}, {"matrix", detail::matrix_rows(m)}};
}

inline Json operator_to_json(const HermitianOperator& h) { return operator_to_json(h.dims(), h.matrix()); }
inline Json operator_to_json(const DensityMatrix& rho) { return operator_to_json(rho.dims(), rho.matrix()); }

/// Reads the shared matrix document; rejects non-square and non-Hermitian payloads.
inline HermitianOperator hermitian_from_json(const Json& j) {
  const BipartiteDims dims = dims_from_json(detail::require_field(j, "dims", ""));
  const Matrix m = detail::parse_matrix_rows(detail::require_field(j, "matrix", ""), "matrix");
  if (m.rows() != m.cols()) throw SchemaError("matrix", detail::concat("not square: ", m.rows(), "x", m.cols()));
  if (m.rows() != dims.total()) {
    throw SchemaError("matrix", detail::concat("size ", m.rows(), " does not match dims (", dims.total(), ")"));
  }
  const double defect = hermiticity_defect(m);
  if (defect > kJsonHermiticityTolerance) {
    throw SchemaError("matrix", detail::concat("not Hermitian (defect ", defect, ")"));
  }
  return {dims, m};
}

inline DensityMatrix density_from_json(const Json& j) {
  const HermitianOperator h = hermitian_from_json(j);
  try {
    return {h.dims(), h.matrix()};
  } catch (const DomainError& e) {
    throw SchemaError("matrix", e.what());
  }
}

// ---------------------------------------------------------------------------
// channels

inline Json channel_to_json(const KrausChannel& ch) {
  Json kraus = Json::array();
  for (const auto& a : ch.elements()) kraus.push_back(Json{{"matrix", detail::matrix_rows(a)}});
  return Json{{"kraus", kraus}, {"in_dim", ch.in_dim()}, {"out_dim", ch.out_dim()}};
}

/// Kraus elements may be given as bare row arrays or as objects with a "matrix" field.
inline KrausChannel channel_from_json(const Json& j) {
  const Json& kraus = detail::require_field(j, "kraus", "");
  const int in_dim = detail::require_int(detail::require_field(j, "in_dim", ""), "in_dim");
  const int out_dim = detail::require_int(detail::require_field(j, "out_dim", ""), "out_dim");
  if (!kraus.is_array() || kraus.empty()) throw SchemaError("kraus", "expected a non-empty array");
  std::vector<Matrix> elems;
  for (std::size_t i = 0; i < kraus.size(); ++i) {
    const std::string path = detail::concat("kraus[", i, "]");
    const Json& k = kraus[i];
    const Matrix a = k.is_object() ? detail::parse_matrix_rows(detail::require_field(k, "matrix", path), path + ".matrix")
                                   : detail::parse_matrix_rows(k, path);
    if (a.rows() != out_dim || a.cols() != in_dim) {
      throw SchemaError(path, detail::concat("shape ", a.rows(), "x", a.cols(), " differs from out_dim x in_dim = ",
                                             out_dim, "x", in_dim));
    }
    elems.push_back(a);
  }
  try {
    return KrausChannel::detect(std::move(elems));
  } catch (const std::exception& e) {
    throw SchemaError("kraus", e.what());
  }
}

// ---------------------------------------------------------------------------
// values

inline Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(Json::array({v(i).real(), v(i).imag()}));
  return out;
}

inline Vector vector_from_json(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw SchemaError(path, "expected a non-empty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = detail::parse_entry(j[i], detail::concat(path, "[", i, "]"));
  return v;
}

/// -inf is not representable in JSON; it is written as the string "-inf".
inline Json extended_to_json(const ExtendedReal& x) {
  return x.is_minus_infinity() ? Json("-inf") : Json(x.value());
}

// ---------------------------------------------------------------------------
// sweep CSV

inline std::string format_g12(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline constexpr const char* kSweepCsvHeader = "p,h_p,h_p_pow_inv,exp_g,gap";

inline std::string sweep_to_csv(const PuritySweep& sweep) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  for (const auto& r : sweep.rows) {
    out += format_g12(r.p) + "," + format_g12(r.h_p) + "," + format_g12(r.h_p_pow_inv) + "," + format_g12(r.exp_g) +
           "," + format_g12(r.gap) + "\n";
  }
  return out;
}

inline void emit_sweep_csv(const PuritySweep& sweep, const std::string& path) {
  write_text_file(path, sweep_to_csv(sweep));
}

inline std::vector<PuritySweepRow> sweep_rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kSweepCsvHeader) throw SchemaError("header", "unexpected CSV header");
  std::vector<PuritySweepRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw SchemaError(detail::concat("line ", line_no), detail::concat("not a number: '", cell, "'"));
      }
    }
    if (cells.size() != 5) throw SchemaError(detail::concat("line ", line_no), "expected 5 columns");
    rows.push_back({cells[0], cells[1], cells[2], cells[3], cells[4]});
  }
  return rows;
}

}  // namespace eofdual
