#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "kronbal/errors.hpp"
#include "kronbal/kron.hpp"
#include "kronbal/model.hpp"

namespace kronbal {

/// Solves L_m(M)^T x = b with L_m(M) = sum_j I^{(j-1)} (x) M (x) I^{(m-j)}.
/// M = U T U^H (complex Schur); the transformed system is block triangular
/// in the leading Kronecker digit and is solved by recursion on m, so one
/// solve costs O(m n^{m+1}).
class KroneckerSumSolver {
 public:
  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;
  using CVector = Eigen::VectorXcd;

  explicit KroneckerSumSolver(const Matrix& M) {
    if (M.rows() != M.cols() || M.rows() == 0) {
      throw InvalidArgument("KroneckerSumSolver: matrix must be square");
    }
    Eigen::ComplexSchur<CMatrix> schur(M.cast<Complex>());
    if (schur.info() != Eigen::Success) throw SolverError("complex Schur decomposition failed");
    U_ = schur.matrixU();
    T_ = schur.matrixT();
    Uh_ = U_.adjoint();
    scale_ = std::max(1.0, T_.diagonal().cwiseAbs().maxCoeff());
  }

  Vector solve(const Vector& b, int m) const {
    if (m < 1) throw InvalidArgument("KroneckerSumSolver: m must be >= 1");
    const auto n = static_cast<std::size_t>(T_.rows());
    if (static_cast<std::size_t>(b.size()) != checked_pow(n, static_cast<std::size_t>(m))) {
      throw InvalidArgument("KroneckerSumSolver: right-hand side length mismatch");
    }
    CVector y = kron_power_apply(U_, CVector(b.cast<Complex>()), m);
    solve_shifted(m, Complex(0.0), y.data());
    return kron_power_apply(Uh_, y, m).real();
  }

 private:
  // (L_m(T)^T + shift I) y = c, in place.
  void solve_shifted(int m, Complex shift, Complex* y) const {
    const Eigen::Index n = T_.rows();
    if (m == 1) {
      for (Eigen::Index a = 0; a < n; ++a) {
        Complex s = y[a];
        for (Eigen::Index j = 0; j < a; ++j) s -= T_(j, a) * y[j];
        const Complex diag = T_(a, a) + shift;
        if (std::abs(diag) <= 1e-13 * scale_) {
          throw SolverError("Kronecker-sum operator is singular (eigenvalue sum at zero)");
        }
        y[a] = s / diag;
      }
      return;
    }
    Eigen::Index inner = 1;
    for (int i = 1; i < m; ++i) inner *= n;
    Eigen::Map<CMatrix> Y(y, inner, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a > 0) Y.col(a).noalias() -= Y.leftCols(a) * T_.col(a).head(a);
      solve_shifted(m - 1, shift + T_(a, a), Y.col(a).data());
    }
  }

  CMatrix U_;
  CMatrix T_;
  CMatrix Uh_;
  double scale_ = 1.0;
};

namespace detail {

inline void require_hurwitz(const Matrix& A) {
  const Eigen::VectorXcd eig = A.eigenvalues();
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    if (eig[i].real() >= 0.0) {
      throw SolverError("A is not Hurwitz (eigenvalue with real part " +
                        std::to_string(eig[i].real()) + ")");
    }
  }
}

inline Matrix lyapunov_from_vec(const Vector& x, Eigen::Index n) {
  Matrix X = Eigen::Map<const Matrix>(x.data(), n, n);
  return 0.5 * (X + X.transpose());
}

}  // namespace detail

/// Solves A P + P A^T + Q = 0.
inline Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  const Matrix At = A.transpose();
  const Vector q = Eigen::Map<const Vector>(Q.data(), Q.size());
  return detail::lyapunov_from_vec(KroneckerSumSolver(At).solve(-q, 2), A.rows());
}

/// V_2 = P^{-1} with A P + P A^T + B B^T = 0.
inline Matrix solve_controllability_quadratic(const Matrix& A, const Matrix& B) {
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw InvalidArgument("solve_controllability_quadratic: dimension mismatch");
  }
  detail::require_hurwitz(A);
  const Matrix P = solve_lyapunov(A, B * B.transpose());
  Eigen::LLT<Matrix> llt(P);
  const double pmax = P.cwiseAbs().maxCoeff();
  if (llt.info() != Eigen::Success || pmax == 0.0 ||
      llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 1e-14 * std::sqrt(pmax)) {
    throw SolverError("controllability Gramian is singular; (A, B) is not controllable");
  }
  Matrix V2 = llt.solve(Matrix::Identity(A.rows(), A.cols()));
  return 0.5 * (V2 + V2.transpose());
}

/// W_2 with A^T W_2 + W_2 A + C^T C = 0.
inline Matrix solve_observability_quadratic(const Matrix& A, const Matrix& C,
                                            Warnings* warnings = nullptr) {
  if (A.rows() != A.cols() || C.cols() != A.rows()) {
    throw InvalidArgument("solve_observability_quadratic: dimension mismatch");
  }
  detail::require_hurwitz(A);
  const Matrix CtC = C.transpose() * C;
  const Vector q = Eigen::Map<const Vector>(CtC.data(), CtC.size());
  Matrix W2 = detail::lyapunov_from_vec(KroneckerSumSolver(A).solve(-q, 2), A.rows());
  Eigen::LLT<Matrix> llt(W2);
  if (llt.info() != Eigen::Success || W2.isZero(0.0)) {
    warn(warnings, "observability Gramian W_2 is not positive definite; (A, C) is not observable");
  }
  return W2;
}

enum class EnergyKind { Controllability, Observability };

/// Degree-d Taylor expansion of the controllability energy (solution of
/// dE/dx f + 1/2 |B^T dE/dx^T|^2 = 0) or the observability energy (solution
/// of dE/dx f + 1/2 |C x|^2 = 0) for the polynomial model.
inline EnergyExpansion solve_energy_expansion(const PolynomialDynamics& model, int d,
                                              EnergyKind which, Warnings* warnings = nullptr) {
  model.validate();
  if (d < 2) throw InvalidArgument("solve_energy_expansion: degree must be >= 2");
  const std::size_t n = model.n();
  const auto nn = static_cast<Eigen::Index>(n);
  EnergyExpansion e = EnergyExpansion::zeros(n, d);

  const bool ctrl = which == EnergyKind::Controllability;
  const Matrix V2 = ctrl ? solve_controllability_quadratic(model.A, model.B)
                         : solve_observability_quadratic(model.A, model.C, warnings);
  e.coeff(2) = Eigen::Map<const Vector>(V2.data(), V2.size());
  if (d == 2) return e;

  const Matrix BBt = model.B * model.B.transpose();
  const Matrix Astar = ctrl ? Matrix(model.A + BBt * V2) : model.A;
  const KroneckerSumSolver solver(Astar);
  MonomialTables tables;

  // V_k = reshape(v_k, n^{k-1}, n): gradient of v_k^T x^{(k)} is k V_k^T x^{(k-1)}
  auto gradient_factor = [&](int k) {
    return Eigen::Map<const Matrix>(e.coeff(k).data(),
                                    static_cast<Eigen::Index>(checked_pow(n, static_cast<std::size_t>(k - 1))),
                                    nn);
  };

  for (int m = 3; m <= d; ++m) {
    const auto len = static_cast<Eigen::Index>(checked_pow(n, static_cast<std::size_t>(m)));
    Vector rhs = Vector::Zero(len);
    for (int j = 2; j <= m - 1; ++j) {
      const auto f = model.F.find(j);
      if (f == model.F.end()) continue;
      const int k = m - j + 1;
      const Matrix prod = gradient_factor(k) * f->second;
      rhs += k * Eigen::Map<const Vector>(prod.data(), prod.size());
    }
    if (ctrl) {
      for (int k = 3; k <= m - 1; ++k) {
        const int l = m + 2 - k;
        const Matrix prod = gradient_factor(k) * BBt * gradient_factor(l).transpose();
        rhs += 0.25 * k * l * Eigen::Map<const Vector>(prod.data(), prod.size());
      }
    }
    const auto map = tables.get(n, static_cast<std::size_t>(m));
    rhs = map->symmetrize(rhs);
    e.coeff(m) = map->symmetrize(solver.solve(-rhs, m));
  }
  return e;
}

}  // namespace kronbal
