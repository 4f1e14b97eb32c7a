#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kronbal/errors.hpp"
#include "kronbal/kron.hpp"

namespace kronbal {

/// x' = A x + sum_i F_i x^{(i)} + B u,  y = C x.
struct PolynomialDynamics {
  Matrix A;
  Matrix B;
  Matrix C;
  std::map<int, Matrix> F;  // degree -> n x n^degree, degrees >= 2

  std::size_t n() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t m() const { return static_cast<std::size_t>(B.cols()); }
  std::size_t p() const { return static_cast<std::size_t>(C.rows()); }

  void validate() const {
    const auto dim = A.rows();
    if (dim == 0 || A.cols() != dim) throw ValidationError("A: must be a nonempty square matrix");
    if (B.rows() != dim) throw ValidationError("B: expected " + std::to_string(dim) + " rows");
    if (C.cols() != dim) throw ValidationError("C: expected " + std::to_string(dim) + " columns");
    for (const auto& [degree, f] : F) {
      const std::string field = "F." + std::to_string(degree);
      if (degree < 2) throw ValidationError(field + ": degrees start at 2");
      if (f.rows() != dim ||
          static_cast<std::size_t>(f.cols()) !=
              checked_pow(n(), static_cast<std::size_t>(degree))) {
        throw ValidationError(field + ": expected " + std::to_string(dim) + " x n^" +
                              std::to_string(degree) + " matrix");
      }
    }
  }

  bool is_hurwitz() const {
    return (A.eigenvalues().real().array() < 0.0).all();
  }

  int max_degree() const { return F.empty() ? 1 : F.rbegin()->first; }

  /// f(x) = A x + sum_i F_i x^{(i)}.
  template <class Scalar>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> drift(
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) const {
    if (static_cast<std::size_t>(x.size()) != n()) {
      throw InvalidArgument("drift: expected state of length " + std::to_string(n()));
    }
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out = A.cast<Scalar>() * x;
    for (const auto& [degree, f] : F) out += f.template cast<Scalar>() * kron_power(x, degree);
    return out;
  }
};

/// Coefficients v_i of E(x) = 1/2 sum_{i=2}^d v_i^T x^{(i)}; coeffs[i] has
/// length n^i, entries 0 and 1 are unused.
struct EnergyExpansion {
  std::size_t n = 0;
  int d = 0;
  std::vector<Vector> coeffs;

  static EnergyExpansion zeros(std::size_t n, int d) {
    if (n == 0 || d < 2) throw InvalidArgument("EnergyExpansion: need n >= 1, d >= 2");
    EnergyExpansion e{n, d, std::vector<Vector>(static_cast<std::size_t>(d) + 1)};
    for (int k = 2; k <= d; ++k) {
      e.coeffs[static_cast<std::size_t>(k)] = Vector::Zero(
          static_cast<Eigen::Index>(checked_pow(n, static_cast<std::size_t>(k))));
    }
    return e;
  }

  const Vector& coeff(int k) const { return coeffs.at(static_cast<std::size_t>(k)); }
  Vector& coeff(int k) { return coeffs.at(static_cast<std::size_t>(k)); }

  /// The quadratic coefficient reshaped to n x n.
  Matrix quadratic() const {
    const auto dim = static_cast<Eigen::Index>(n);
    return Eigen::Map<const Matrix>(coeff(2).data(), dim, dim);
  }

  void validate(const char* name = "v") const {
    if (n == 0 || d < 2) throw ValidationError(std::string(name) + ": need n >= 1 and d >= 2");
    if (coeffs.size() != static_cast<std::size_t>(d) + 1) {
      throw ValidationError(std::string(name) + ": expected degrees 2.." + std::to_string(d));
    }
    for (int k = 2; k <= d; ++k) {
      if (static_cast<std::size_t>(coeff(k).size()) !=
          checked_pow(n, static_cast<std::size_t>(k))) {
        throw ValidationError(std::string(name) + "." + std::to_string(k) +
                              ": expected length n^" + std::to_string(k));
      }
    }
  }
};

/// x = Phi(z) = sum_i T_i z^{(i)}; T[i] is n x n^i, T[0] is unused.
struct Transformation {
  std::size_t n = 0;
  std::vector<Matrix> T;

  int max_degree() const { return static_cast<int>(T.size()) - 1; }
};

/// sigma_i^2(z_i) = sigma0_sq_i + sum_j higher[j]_i z_i^j.
struct SingularValueFunctions {
  std::size_t n = 0;
  Vector sigma0_sq;
  std::map<int, Vector> higher;

  double evaluate(std::size_t i, double z) const {
    const auto idx = static_cast<Eigen::Index>(i);
    double value = sigma0_sq[idx];
    for (const auto& [j, c] : higher) value += c[idx] * std::pow(z, j);
    return value;
  }
};

/// 1/2 sum_i v_i^T x^{(i)}.
template <class Scalar>
Scalar evaluate_energy(const EnergyExpansion& e,
                       const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
  if (static_cast<std::size_t>(x.size()) != e.n) {
    throw InvalidArgument("evaluate_energy: expected state of length " + std::to_string(e.n));
  }
  Scalar total(0);
  for (int k = 2; k <= e.d; ++k) {
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> power = kron_power(x, k);
    for (Eigen::Index i = 0; i < power.size(); ++i) total += e.coeff(k)[i] * power[i];
  }
  return total / Scalar(2);
}

inline double evaluate_energy(const EnergyExpansion& e, const Vector& x) {
  return evaluate_energy<double>(e, x);
}

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> evaluate_transformation(
    const Transformation& t, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& z) {
  if (static_cast<std::size_t>(z.size()) != t.n) {
    throw InvalidArgument("evaluate_transformation: expected length " + std::to_string(t.n));
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(z.size());
  for (int i = 1; i <= t.max_degree(); ++i) {
    x += t.T[static_cast<std::size_t>(i)].template cast<Scalar>() * kron_power(z, i);
  }
  return x;
}

inline Vector evaluate_transformation(const Transformation& t, const Vector& z) {
  return evaluate_transformation<double>(t, z);
}

/// A monomial prod_j x_j^{exponents[j]} with a coefficient.
struct Term {
  std::vector<int> exponents;
  double coefficient;
};

/// Symmetric degree-k Kronecker coefficient of a sum of monomial terms: each
/// term's coefficient is spread evenly over its class of slots.
inline Vector from_monomials(std::size_t n, std::size_t k, const std::vector<Term>& terms) {
  const DuplicationMap map(n, k);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(map.cols()));
  std::vector<int> factors;
  for (const Term& t : terms) {
    if (t.exponents.size() != n) throw InvalidArgument("from_monomials: exponent length");
    factors.clear();
    for (std::size_t j = 0; j < n; ++j) factors.insert(factors.end(), static_cast<std::size_t>(t.exponents[j]), static_cast<int>(j));
    if (factors.size() != k) throw InvalidArgument("from_monomials: degree mismatch");
    const auto support = map.support(map.row_of(factors_to_index(factors, n)));
    for (std::size_t c : support) {
      out[static_cast<Eigen::Index>(c)] += t.coefficient / static_cast<double>(support.size());
    }
  }
  return out;
}

/// Controllability and observability expansions of the two-state example
/// with E_c = (x1^2 + x2^2)/2 and E_o expanded to degree 6.
inline std::pair<EnergyExpansion, EnergyExpansion> fujimoto2d_energy_coeffs() {
  EnergyExpansion ec = EnergyExpansion::zeros(2, 6);
  EnergyExpansion eo = EnergyExpansion::zeros(2, 6);
  ec.coeff(2) = from_monomials(2, 2, {{{2, 0}, 1.0}, {{0, 2}, 1.0}});
  eo.coeff(2) = from_monomials(2, 2, {{{2, 0}, 36.0}, {{0, 2}, 9.0}});
  eo.coeff(4) = from_monomials(2, 4, {{{3, 1}, 18.0}, {{1, 3}, 18.0}});
  eo.coeff(6) = from_monomials(
      2, 6, {{{6, 0}, -35.0}, {{4, 2}, -75.0}, {{2, 4}, -45.0}, {{0, 6}, -5.0}});
  return {ec, eo};
}

enum class Topology {
  Anchored,  // springs to walls at both ends, every damper to ground
  Chain,     // wall-m1-...-mN with a free end, dampers parallel to springs
};

inline Topology parse_topology(const std::string& name) {
  if (name == "anchored") return Topology::Anchored;
  if (name == "chain") return Topology::Chain;
  throw InvalidArgument("unknown topology '" + name + "' (expected chain|anchored)");
}

/// N unit masses joined by springs with force -(D - D^3/6) in the
/// deformation D.  State [positions; velocities], unit force inputs on every
/// mass, position outputs.
inline PolynomialDynamics duffing_chain(std::size_t N, Topology topology = Topology::Anchored) {
  if (N == 0) throw InvalidArgument("duffing_chain: N must be positive");
  const std::size_t n = 2 * N;
  const auto nn = static_cast<Eigen::Index>(n);
  const auto NN = static_cast<Eigen::Index>(N);

  // deformation vectors over positions
  std::vector<Vector> springs;
  for (std::size_t i = 0; i < N; ++i) {
    Vector a = Vector::Zero(NN);
    a[static_cast<Eigen::Index>(i)] = 1.0;
    if (i > 0) a[static_cast<Eigen::Index>(i) - 1] = -1.0;
    springs.push_back(a);
  }
  if (topology == Topology::Anchored) {
    Vector a = Vector::Zero(NN);
    a[NN - 1] = -1.0;
    springs.push_back(a);
  }

  Matrix K = Matrix::Zero(NN, NN);
  for (const Vector& a : springs) K += a * a.transpose();
  Matrix D = topology == Topology::Chain ? K : Matrix(Matrix::Identity(NN, NN));

  PolynomialDynamics model;
  model.A = Matrix::Zero(nn, nn);
  model.A.topRightCorner(NN, NN).setIdentity();
  model.A.bottomLeftCorner(NN, NN) = -K;
  model.A.bottomRightCorner(NN, NN) = -D;
  model.B = Matrix::Zero(nn, NN);
  model.B.bottomRows(NN).setIdentity();
  model.C = Matrix::Zero(NN, nn);
  model.C.leftCols(NN).setIdentity();

  Matrix F3 = Matrix::Zero(nn, static_cast<Eigen::Index>(checked_pow(n, 3)));
  for (const Vector& a : springs) {
    Vector full = Vector::Zero(nn);
    full.head(NN) = a;
    const Vector cube = kron_power(full, 3);
    for (Eigen::Index i = 0; i < NN; ++i) {
      if (a[i] != 0.0) F3.row(NN + i) += (a[i] / 6.0) * cube.transpose();
    }
  }
  model.F[3] = F3;
  return model;
}

}  // namespace kronbal
