#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"
#include "kronbal/errors.hpp"
#include "kronbal/kron.hpp"
#include "kronbal/model.hpp"

namespace kronbal {

using Json = nlohmann::ordered_json;

namespace io_detail {

inline std::string format_number(double x) {
  if (!std::isfinite(x)) throw ValidationError("non-finite value cannot be written");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s = buf;
  // keep it a JSON float so integral values read back as doubles
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

// Compact arrays of numbers, one key per line otherwise.
inline void emit(std::string& out, const Json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner + Json(it.key()).dump() + ": ";
        emit(out, it.value(), indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      const bool nested = !j.empty() && j.front().is_array();
      out += "[";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",";
        if (nested) out += "\n" + inner;
        emit(out, j[i], indent + 1);
      }
      if (nested) out += "\n" + pad;
      out += "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_number(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

inline Json matrix_to_json(const Matrix& M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline const Json& field(const Json& j, const std::string& name, const std::string& path) {
  if (!j.is_object()) throw ParseError(path + ": expected an object");
  const auto it = j.find(name);
  if (it == j.end()) throw ParseError((path.empty() ? "" : path + ".") + name + ": missing field");
  return *it;
}

inline std::string join(const std::string& path, const std::string& name) {
  return path.empty() ? name : path + "." + name;
}

inline std::size_t read_size(const Json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ParseError(path + ": expected a nonnegative integer");
  }
  return j.get<std::size_t>();
}

inline int read_degree_key(const std::string& key, const std::string& path) {
  std::size_t used = 0;
  int k = -1;
  try {
    k = std::stoi(key, &used);
  } catch (const std::exception&) {
  }
  if (used != key.size() || k < 0) throw ParseError(join(path, key) + ": expected an integer degree key");
  return k;
}

inline double read_number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path + ": expected a number");
  return j.get<double>();
}

inline Vector read_vector(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = read_number(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

inline Matrix read_matrix(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path + ": expected an array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array()) throw ParseError(path + "[" + std::to_string(i) + "]: expected a row array");
    if (i == 0) cols = j[i].size();
    if (j[i].size() != cols) {
      throw ValidationError(path + ": row " + std::to_string(i) + " has " +
                            std::to_string(j[i].size()) + " entries, expected " +
                            std::to_string(cols));
    }
  }
  Matrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t c = 0; c < cols; ++c)
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          read_number(j[i][c], path + "[" + std::to_string(i) + "][" + std::to_string(c) + "]");
  return M;
}

inline void expect_shape(const Matrix& M, std::size_t rows, std::size_t cols,
                         const std::string& path) {
  if (static_cast<std::size_t>(M.rows()) != rows || static_cast<std::size_t>(M.cols()) != cols) {
    throw ValidationError(path + ": expected " + std::to_string(rows) + " x " +
                          std::to_string(cols) + ", got " + std::to_string(M.rows()) + " x " +
                          std::to_string(M.cols()));
  }
}

inline Json parse(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    if (const auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
    throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                     what);
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": file not found");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path + ": write failed");
}

}  // namespace io_detail

/// Pretty JSON with every float written to 17 significant digits.
inline std::string dump_json(const Json& j) {
  std::string out;
  io_detail::emit(out, j, 0);
  return out + "\n";
}

inline Json model_to_json(const PolynomialDynamics& model) {
  model.validate();
  Json j;
  j["n"] = model.n();
  j["m"] = model.m();
  j["p"] = model.p();
  j["A"] = io_detail::matrix_to_json(model.A);
  j["B"] = io_detail::matrix_to_json(model.B);
  j["C"] = io_detail::matrix_to_json(model.C);
  Json f = Json::object();
  for (const auto& [degree, F] : model.F) f[std::to_string(degree)] = io_detail::matrix_to_json(F);
  j["F"] = std::move(f);
  return j;
}

inline PolynomialDynamics model_from_json(const Json& j) {
  using namespace io_detail;
  const std::size_t n = read_size(field(j, "n", ""), "n");
  const std::size_t m = read_size(field(j, "m", ""), "m");
  const std::size_t p = read_size(field(j, "p", ""), "p");
  PolynomialDynamics model;
  model.A = read_matrix(field(j, "A", ""), "A");
  model.B = read_matrix(field(j, "B", ""), "B");
  model.C = read_matrix(field(j, "C", ""), "C");
  expect_shape(model.A, n, n, "A");
  expect_shape(model.B, n, m, "B");
  expect_shape(model.C, p, n, "C");
  if (j.contains("F")) {
    const Json& f = j["F"];
    if (!f.is_object()) throw ParseError("F: expected an object keyed by degree");
    for (auto it = f.begin(); it != f.end(); ++it) {
      const int degree = read_degree_key(it.key(), "F");
      const std::string path = "F." + it.key();
      Matrix M = read_matrix(it.value(), path);
      if (degree < 2) throw ValidationError(path + ": degrees start at 2");
      expect_shape(M, n, checked_pow(n, static_cast<std::size_t>(degree)), path);
      model.F[degree] = std::move(M);
    }
  }
  model.validate();
  return model;
}

namespace io_detail {

inline Json expansion_to_json(const EnergyExpansion& e) {
  Json j = Json::object();
  for (int k = 2; k <= e.d; ++k) j[std::to_string(k)] = vector_to_json(e.coeff(k));
  return j;
}

// Coefficients already symmetric up to rounding are kept as written so that
// files round-trip exactly.
inline EnergyExpansion expansion_from_json(const Json& j, std::size_t n, int d,
                                           const std::string& name, Warnings* warnings) {
  if (!j.is_object()) throw ParseError(name + ": expected an object keyed by degree");
  EnergyExpansion e = EnergyExpansion::zeros(n, d);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const int k = read_degree_key(it.key(), name);
    const std::string path = name + "." + it.key();
    if (k < 2 || k > d) {
      throw ValidationError(path + ": degree outside 2.." + std::to_string(d));
    }
    Vector v = read_vector(it.value(), path);
    if (static_cast<std::size_t>(v.size()) != checked_pow(n, static_cast<std::size_t>(k))) {
      throw ValidationError(path + ": expected length n^" + std::to_string(k) + " = " +
                            std::to_string(checked_pow(n, static_cast<std::size_t>(k))) +
                            ", got " + std::to_string(v.size()));
    }
    const Vector s = symmetrize(v, n, static_cast<std::size_t>(k));
    if ((s - v).norm() > 1e-13 * (1.0 + v.norm())) {
      warn(warnings, path + ": coefficient was not symmetric; symmetrized on load");
      v = s;
    }
    e.coeff(k) = std::move(v);
  }
  return e;
}

}  // namespace io_detail

/// Either expansion may be absent.
struct EnergyFile {
  std::size_t n = 0;
  int d = 0;
  std::optional<EnergyExpansion> v;
  std::optional<EnergyExpansion> w;
};

inline Json energy_to_json(const EnergyFile& f) {
  Json j;
  j["n"] = f.n;
  j["d"] = f.d;
  for (const auto* e : {&f.v, &f.w}) {
    if (!e->has_value()) continue;
    (*e)->validate(e == &f.v ? "v" : "w");
    if ((*e)->n != f.n || (*e)->d != f.d) {
      throw ValidationError(std::string(e == &f.v ? "v" : "w") + ": dimension or degree mismatch");
    }
  }
  if (f.v) j["v"] = io_detail::expansion_to_json(*f.v);
  if (f.w) j["w"] = io_detail::expansion_to_json(*f.w);
  return j;
}

inline EnergyFile energy_from_json(const Json& j, Warnings* warnings = nullptr) {
  using namespace io_detail;
  EnergyFile f;
  f.n = read_size(field(j, "n", ""), "n");
  const std::size_t d = read_size(field(j, "d", ""), "d");
  if (f.n == 0) throw ValidationError("n: must be positive");
  if (d < 2) throw ValidationError("d: must be >= 2");
  f.d = static_cast<int>(d);
  if (j.contains("v")) f.v = expansion_from_json(j["v"], f.n, f.d, "v", warnings);
  if (j.contains("w")) f.w = expansion_from_json(j["w"], f.n, f.d, "w", warnings);
  if (!f.v && !f.w) throw ValidationError("v: energy file holds neither v nor w");
  return f;
}

/// sigma_squared maps the power j of z_i to the coefficient vector over i;
/// "0" holds sigma0_sq.
inline Json transformation_to_json(const Transformation& t, const SingularValueFunctions& s) {
  Json j;
  j["n"] = t.n;
  j["max_degree"] = t.max_degree();
  Json T = Json::object();
  for (int i = 1; i <= t.max_degree(); ++i) {
    const Matrix& Ti = t.T[static_cast<std::size_t>(i)];
    io_detail::expect_shape(Ti, t.n, checked_pow(t.n, static_cast<std::size_t>(i)),
                            "T." + std::to_string(i));
    T[std::to_string(i)] = io_detail::matrix_to_json(Ti);
  }
  j["T"] = std::move(T);
  Json sig = Json::object();
  sig["0"] = io_detail::vector_to_json(s.sigma0_sq);
  for (const auto& [power, c] : s.higher) sig[std::to_string(power)] = io_detail::vector_to_json(c);
  j["sigma_squared"] = std::move(sig);
  return j;
}

inline std::pair<Transformation, SingularValueFunctions> transformation_from_json(const Json& j) {
  using namespace io_detail;
  Transformation t;
  t.n = read_size(field(j, "n", ""), "n");
  if (t.n == 0) throw ValidationError("n: must be positive");
  const std::size_t max_degree = read_size(field(j, "max_degree", ""), "max_degree");
  if (max_degree < 1) throw ValidationError("max_degree: must be >= 1");
  const Json& T = field(j, "T", "");
  t.T.assign(max_degree + 1, Matrix());
  for (std::size_t i = 1; i <= max_degree; ++i) {
    const std::string key = std::to_string(i);
    const std::string path = "T." + key;
    if (!T.is_object() || !T.contains(key)) throw ValidationError(path + ": missing");
    t.T[i] = read_matrix(T[key], path);
    expect_shape(t.T[i], t.n, checked_pow(t.n, i), path);
  }
  SingularValueFunctions s;
  s.n = t.n;
  const Json& sig = field(j, "sigma_squared", "");
  if (!sig.is_object()) throw ParseError("sigma_squared: expected an object keyed by power");
  for (auto it = sig.begin(); it != sig.end(); ++it) {
    const int power = read_degree_key(it.key(), "sigma_squared");
    const std::string path = "sigma_squared." + it.key();
    Vector c = read_vector(it.value(), path);
    if (static_cast<std::size_t>(c.size()) != t.n) {
      throw ValidationError(path + ": expected length " + std::to_string(t.n));
    }
    if (power == 0) {
      s.sigma0_sq = std::move(c);
    } else {
      s.higher[power] = std::move(c);
    }
  }
  if (s.sigma0_sq.size() == 0) throw ValidationError("sigma_squared.0: missing");
  return {t, s};
}

inline Json read_json_file(const std::string& path) {
  return io_detail::parse(io_detail::read_file(path), path);
}

inline PolynomialDynamics read_model(const std::string& path) {
  return model_from_json(read_json_file(path));
}
inline void write_model(const std::string& path, const PolynomialDynamics& model) {
  io_detail::write_file(path, dump_json(model_to_json(model)));
}

inline EnergyFile read_energy(const std::string& path, Warnings* warnings = nullptr) {
  return energy_from_json(read_json_file(path), warnings);
}
inline void write_energy(const std::string& path, const EnergyFile& f) {
  io_detail::write_file(path, dump_json(energy_to_json(f)));
}

inline std::pair<Transformation, SingularValueFunctions> read_transformation(
    const std::string& path) {
  return transformation_from_json(read_json_file(path));
}
inline void write_transformation(const std::string& path, const Transformation& t,
                                 const SingularValueFunctions& s) {
  io_detail::write_file(path, dump_json(transformation_to_json(t, s)));
}

}  // namespace kronbal
