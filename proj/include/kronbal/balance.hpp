#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "kronbal/errors.hpp"
#include "kronbal/kron.hpp"
#include "kronbal/model.hpp"

namespace kronbal {

struct BalancingFactors {
  Matrix R;  // V_2 = R R^T, lower triangular
  Matrix L;  // W_2 = L L^T, lower triangular
  Matrix U;
  Matrix V;
  Vector Sigma;
  Matrix T1;
  Matrix T1inv;
};

/// Square-root balancing of the quadratic energy coefficients: with the SVD
/// L^T R^{-T} = U Sigma V^T, T1 = R^{-T} V gives T1^T V_2 T1 = I and
/// T1^T W_2 T1 = Sigma^2.  Each column of V is signed so that its largest
/// entry is positive.
inline BalancingFactors linear_balancing(const Matrix& V2, const Matrix& W2,
                                         Warnings* warnings = nullptr) {
  if (V2.rows() != V2.cols() || W2.rows() != W2.cols() || V2.rows() != W2.rows() ||
      V2.rows() == 0) {
    throw InvalidArgument("linear_balancing: V_2 and W_2 must be square of equal size");
  }
  const auto n = V2.rows();
  Eigen::LLT<Matrix> llt_v(V2), llt_w(W2);
  if (llt_v.info() != Eigen::Success) throw SolverError("V_2 is not positive definite");
  if (llt_w.info() != Eigen::Success) throw SolverError("W_2 is not positive definite");

  BalancingFactors f;
  f.R = llt_v.matrixL();
  f.L = llt_w.matrixL();
  // R^{-T}
  const Matrix Rinv_t =
      f.R.transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(n, n));
  const Matrix M = f.L.transpose() * Rinv_t;
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  f.U = svd.matrixU();
  f.V = svd.matrixV();
  f.Sigma = svd.singularValues();
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index imax = 0;
    f.V.col(j).cwiseAbs().maxCoeff(&imax);
    if (f.V(imax, j) < 0) {
      f.V.col(j) *= -1.0;
      f.U.col(j) *= -1.0;
    }
  }
  f.T1 = Rinv_t * f.V;
  f.T1inv = f.V.transpose() * f.R.transpose();

  const double smax = f.Sigma[0];
  std::string small;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (f.Sigma[i] < 1e3 * std::numeric_limits<double>::epsilon() * smax) {
      small += (small.empty() ? "" : ", ") + std::to_string(i + 1);
    }
  }
  if (!small.empty()) {
    warn(warnings, "ill-conditioned balancing: Hankel singular values " + small +
                       " are below 1e3*eps*sigma_max");
  }
  return f;
}

/// (T1^{(i)})^T v_i for every degree.
inline EnergyExpansion transform_coefficients(const EnergyExpansion& e, const Matrix& T1) {
  if (static_cast<std::size_t>(T1.rows()) != e.n || T1.cols() != T1.rows()) {
    throw InvalidArgument("transform_coefficients: T1 must be n x n");
  }
  EnergyExpansion out = e;
  for (int k = 2; k <= e.d; ++k) out.coeff(k) = kron_power_apply(T1, e.coeff(k), k);
  return out;
}

/// Degree-d truncation of E(Phi(z)): v~_k = symmetrize(sum_i T_{i,k}^T v_i).
/// Missing degrees of Phi count as zero.
inline EnergyExpansion compose_energy(const EnergyExpansion& e, const Transformation& t, int d) {
  if (t.n != e.n || t.max_degree() < 1) {
    throw InvalidArgument("compose_energy: transformation dimension mismatch");
  }
  if (d < 2 || d > e.d) throw InvalidArgument("compose_energy: degree out of range");
  const auto nn = static_cast<Eigen::Index>(e.n);
  std::vector<Matrix> T(static_cast<std::size_t>(d));
  for (int i = 1; i < d; ++i) {
    T[static_cast<std::size_t>(i)] =
        i <= t.max_degree()
            ? t.T[static_cast<std::size_t>(i)]
            : Matrix::Zero(nn, static_cast<Eigen::Index>(checked_pow(e.n, static_cast<std::size_t>(i))));
  }
  EnergyExpansion out = EnergyExpansion::zeros(e.n, d);
  MonomialTables tables;
  for (int k = 2; k <= d; ++k) {
    Vector c = Vector::Zero(out.coeff(k).size());
    for (int i = 2; i <= k; ++i) c += calT_transpose_apply(T, i, k, e.coeff(i));
    out.coeff(k) = tables.get(e.n, static_cast<std::size_t>(k))->symmetrize(c);
  }
  return out;
}

/// Pairs (i, j), 0-based, of singular values closer than tol relative to the largest.
inline std::vector<std::pair<int, int>> repeated_singular_values(const Vector& sigma,
                                                                 double tol = 1e-8) {
  std::vector<std::pair<int, int>> pairs;
  const double smax = sigma.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    for (Eigen::Index j = i + 1; j < sigma.size(); ++j)
      if (std::abs(sigma[i] - sigma[j]) < tol * smax)
        pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
  return pairs;
}

inline std::string describe_pairs(const std::vector<std::pair<int, int>>& pairs,
                                  const Vector& sigma) {
  std::string s;
  for (const auto& [i, j] : pairs) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%ssigma_%d = %.6g ~ sigma_%d = %.6g", s.empty() ? "" : "; ",
                  i + 1, sigma[i], j + 1, sigma[j]);
    s += buf;
  }
  return s;
}

/// Degree-k input-normal / output-diagonal equations for T^_{k-1}.  The
/// unknowns are class sums t_{r,b} of row r of T^_{k-1} over the degree-(k-1)
/// monomial b (column r * rows_{k-1} + b).  Row a < rows_k is the
/// input-normal equation of monomial a; off-diagonal a >= n also has the
/// output-diagonal row rows_k + a - n.
struct InOdSystem {
  std::size_t n = 0;
  int k = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
  Vector rhs;
  Vector sigma_sq;
  std::shared_ptr<const DuplicationMap> map_k;
  std::shared_ptr<const DuplicationMap> map_prev;
  // unknown columns of each monomial block, CSR over rows of map_k
  std::vector<std::size_t> block_offsets;
  std::vector<std::size_t> block_cols;
  std::vector<int> block_vars;

  std::size_t block_count() const { return map_k->rows(); }
  std::size_t in_row(std::size_t a) const { return a; }
  std::size_t od_row(std::size_t a) const { return map_k->rows() + a - n; }
};

/// Expected equation counts: rows 2 C(n+k-1,k) - n, reduced columns n C(n+k-2,k-1).
inline std::size_t in_od_row_count(std::size_t n, int k) {
  return 2 * monomial_count(n, static_cast<std::size_t>(k)) - n;
}
inline std::size_t in_od_col_count(std::size_t n, int k) {
  return checked_mul(n, monomial_count(n, static_cast<std::size_t>(k - 1)));
}

namespace detail {

// Block structure and sparse matrix only; rhs left empty.
inline InOdSystem in_od_structure(std::size_t n, int k, const Vector& sigma,
                                  MonomialTables& tables) {
  if (k < 3) throw InvalidArgument("in_od_structure: degree must be >= 3");
  if (static_cast<std::size_t>(sigma.size()) != n) {
    throw InvalidArgument("in_od_structure: Sigma must have length n");
  }
  InOdSystem sys;
  sys.n = n;
  sys.k = k;
  sys.map_k = tables.get(n, static_cast<std::size_t>(k));
  sys.map_prev = tables.get(n, static_cast<std::size_t>(k - 1));
  const std::size_t rk = sys.map_k->rows();
  const std::size_t rprev = sys.map_prev->rows();
  sys.rows = 2 * rk - n;
  sys.cols = checked_mul(n, rprev);
  sys.sigma_sq = sigma.array().square();

  sys.block_offsets.assign(rk + 1, 0);
  std::vector<int> reduced(static_cast<std::size_t>(k - 1));
  for (std::size_t a = 0; a < rk; ++a) {
    const auto factors = sys.map_k->factors(a);
    for (std::size_t pos = 0; pos < factors.size(); ++pos) {
      if (pos > 0 && factors[pos] == factors[pos - 1]) continue;
      const int r = factors[pos];
      std::size_t q = 0;
      for (std::size_t i = 0; i < factors.size(); ++i)
        if (i != pos) reduced[q++] = factors[i];
      const std::size_t b = sys.map_prev->row_of(factors_to_index(reduced, n));
      sys.block_cols.push_back(static_cast<std::size_t>(r) * rprev + b);
      sys.block_vars.push_back(r);
    }
    sys.block_offsets[a + 1] = sys.block_cols.size();
  }

  // rows are filled in order, so the compressed storage is written directly
  const std::size_t nnz_in = sys.block_cols.size();
  const std::size_t nnz_od = nnz_in - n;
  if (nnz_in + nnz_od > static_cast<std::size_t>(std::numeric_limits<int>::max()) ||
      sys.cols > static_cast<std::size_t>(std::numeric_limits<int>::max())) {
    throw CapacityError("degree-" + std::to_string(k) + " system exceeds sparse index range");
  }
  auto& mat = sys.matrix;
  mat.resize(static_cast<Eigen::Index>(sys.rows), static_cast<Eigen::Index>(sys.cols));
  mat.resizeNonZeros(static_cast<Eigen::Index>(nnz_in + nnz_od));
  auto* outer = mat.outerIndexPtr();
  auto* inner = mat.innerIndexPtr();
  auto* values = mat.valuePtr();
  std::size_t pos = 0;
  std::vector<std::pair<std::size_t, double>> row;
  auto emit_row = [&](std::size_t row_index) {
    std::sort(row.begin(), row.end());
    outer[row_index] = static_cast<int>(pos);
    for (const auto& [c, v] : row) {
      inner[pos] = static_cast<int>(c);
      values[pos] = v;
      ++pos;
    }
  };
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t a = pass == 0 ? 0 : n; a < rk; ++a) {
      row.clear();
      for (std::size_t c = sys.block_offsets[a]; c < sys.block_offsets[a + 1]; ++c) {
        row.emplace_back(sys.block_cols[c],
                         pass == 0 ? 2.0 : 2.0 * sys.sigma_sq[sys.block_vars[c]]);
      }
      emit_row(pass == 0 ? sys.in_row(a) : sys.od_row(a));
    }
  }
  outer[sys.rows] = static_cast<int>(pos);
  return sys;
}

// sum over i, j >= 2, i + j = k of vec(T_j^T D T_i), D diagonal (or identity).
inline Vector quadratic_cross_terms(const std::vector<Matrix>& That, int k, const Vector* diag) {
  const std::size_t n = static_cast<std::size_t>(That[1].rows());
  Vector out = Vector::Zero(static_cast<Eigen::Index>(checked_pow(n, static_cast<std::size_t>(k))));
  for (int i = 2; i <= k - 2; ++i) {
    const int j = k - i;
    const Matrix& Ti = That[static_cast<std::size_t>(i)];
    const Matrix& Tj = That[static_cast<std::size_t>(j)];
    if (Ti.isZero(0.0) || Tj.isZero(0.0)) continue;
    const Matrix prod = diag ? Matrix(Tj.transpose() * diag->asDiagonal() * Ti)
                             : Matrix(Tj.transpose() * Ti);
    out += Eigen::Map<const Vector>(prod.data(), prod.size());
  }
  return out;
}

}  // namespace detail

/// Assembles the degree-k system given T^_1 = I, T^_2..T^_{k-2} (That[i],
/// That.size() >= k-1) and the T1-transformed energy coefficients.
inline InOdSystem assemble_in_od_system(int k, const std::vector<Matrix>& That,
                                        const EnergyExpansion& ev, const EnergyExpansion& ew,
                                        const Vector& sigma, MonomialTables* tables = nullptr) {
  if (k < 3) throw InvalidArgument("assemble_in_od_system: degree must be >= 3");
  if (That.size() < static_cast<std::size_t>(k - 1)) {
    throw InvalidArgument("assemble_in_od_system: missing T^_" + std::to_string(That.size()) +
                          " .. T^_" + std::to_string(k - 2) + " (invalid state)");
  }
  if (ev.d < k || ew.d < k) {
    throw InvalidArgument("assemble_in_od_system: energy coefficients of degree " +
                          std::to_string(k) + " missing (invalid state)");
  }
  MonomialTables local;
  MonomialTables& tab = tables ? *tables : local;
  const std::size_t n = ev.n;
  InOdSystem sys = detail::in_od_structure(n, k, sigma, tab);

  Vector in_sum = detail::quadratic_cross_terms(That, k, nullptr);
  Vector od_sum = detail::quadratic_cross_terms(That, k, &sys.sigma_sq);
  for (int i = 3; i <= k; ++i) {
    in_sum += calT_transpose_apply(That, i, k, ev.coeff(i));
    od_sum += calT_transpose_apply(That, i, k, ew.coeff(i));
  }
  const std::size_t rk = sys.map_k->rows();
  sys.rhs.resize(static_cast<Eigen::Index>(sys.rows));
  sys.rhs.head(static_cast<Eigen::Index>(rk)) = -sys.map_k->combine(in_sum);
  sys.rhs.tail(static_cast<Eigen::Index>(rk - n)) = -sys.map_k->combine_off_diagonal(od_sum);
  return sys;
}

enum class DegeneratePolicy { Warn, Error };

struct BalanceOptions {
  bool min_norm = false;
  DegeneratePolicy degenerate = DegeneratePolicy::Warn;
  double degenerate_tol = 1e-8;
};

struct CoefficientSolution {
  Matrix That;        // n x n^{k-1}, row-symmetric
  Vector reduced;     // solution in reduced coordinates
  std::size_t rank = 0;
  double residual = 0.0;  // |A x - rhs|
};

namespace detail {

template <class Mat>
Vector solve_block_with(const Mat& M, const Eigen::Vector2d& b, bool min_norm) {
  if (min_norm) {
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(M);
    cod.setThreshold(1e-10);
    return cod.solve(b);
  }
  Eigen::ColPivHouseholderQR<Mat> qr(M);
  qr.setThreshold(1e-10);
  return qr.solve(b);
}

// [2 ... 2; 2 s_1^2 ... 2 s_m^2] t = b for one monomial block.
inline Vector solve_block(const InOdSystem& sys, std::size_t begin, std::size_t end,
                          const Eigen::Vector2d& b, bool min_norm) {
  constexpr int kMaxFixed = 8;
  const auto s = static_cast<Eigen::Index>(end - begin);
  auto fill = [&](auto& M) {
    for (std::size_t c = begin; c < end; ++c) {
      M(0, static_cast<Eigen::Index>(c - begin)) = 2.0;
      M(1, static_cast<Eigen::Index>(c - begin)) = 2.0 * sys.sigma_sq[sys.block_vars[c]];
    }
  };
  if (s <= kMaxFixed) {
    Eigen::Matrix<double, 2, Eigen::Dynamic, 0, 2, kMaxFixed> M(2, s);
    fill(M);
    return solve_block_with(M, b, min_norm);
  }
  Matrix M(2, s);
  fill(M);
  return solve_block_with(M, b, min_norm);
}

// Closed form for a block whose sigma values are not all equal.  Basic: the
// columns of smallest and largest sigma carry the solution.  Minimum norm:
// t = a 1 + b c with c the centered sigma^2 values.
inline void solve_separated_block(const InOdSystem& sys, std::size_t begin, std::size_t end,
                                  double b_in, double b_od, bool min_norm, Vector& x) {
  auto col = [&](std::size_t c) { return static_cast<Eigen::Index>(sys.block_cols[c]); };
  auto s2 = [&](std::size_t c) { return sys.sigma_sq[sys.block_vars[c]]; };
  if (!min_norm || end - begin == 2) {
    std::size_t lo = begin, hi = begin;
    for (std::size_t c = begin + 1; c < end; ++c) {
      if (s2(c) < s2(lo)) lo = c;
      if (s2(c) > s2(hi)) hi = c;
    }
    const double t_lo = (s2(hi) * b_in - b_od) / (2.0 * (s2(hi) - s2(lo)));
    x[col(lo)] = t_lo;
    x[col(hi)] = b_in / 2.0 - t_lo;
    return;
  }
  const double count = static_cast<double>(end - begin);
  double sum = 0;
  for (std::size_t c = begin; c < end; ++c) sum += s2(c);
  const double mean = sum / count;
  double cc = 0;
  for (std::size_t c = begin; c < end; ++c) cc += (s2(c) - mean) * (s2(c) - mean);
  const double a = b_in / (2.0 * count);
  const double b = (b_od / 2.0 - a * sum) / cc;
  for (std::size_t c = begin; c < end; ++c) x[col(c)] = a + b * (s2(c) - mean);
}

}  // namespace detail

/// Rank of the system; blocks decouple, so it is the sum of block ranks.
inline std::size_t in_od_rank(const InOdSystem& sys, double tol = 1e-8) {
  std::size_t rank = 0;
  const double smax = sys.sigma_sq.cwiseSqrt().maxCoeff();
  for (std::size_t a = 0; a < sys.block_count(); ++a) {
    if (a < sys.n) {
      ++rank;
      continue;
    }
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (std::size_t c = sys.block_offsets[a]; c < sys.block_offsets[a + 1]; ++c) {
      const double s = std::sqrt(sys.sigma_sq[sys.block_vars[c]]);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    rank += (hi - lo >= tol * smax) ? 2 : 1;
  }
  return rank;
}

/// Solves the block-diagonal system: closed form for blocks with distinct
/// sigma values, otherwise a rank-revealing QR (sparse basic solution) or a
/// complete orthogonal decomposition (minimum norm) per block.
inline CoefficientSolution solve_coefficient(const InOdSystem& sys,
                                             const BalanceOptions& options = {},
                                             Warnings* warnings = nullptr) {
  const std::size_t n = sys.n;
  const double smax = sys.sigma_sq.cwiseSqrt().maxCoeff();
  Vector x = Vector::Zero(static_cast<Eigen::Index>(sys.cols));
  bool degenerate = false;
  Eigen::Vector2d b;
  for (std::size_t a = 0; a < sys.block_count(); ++a) {
    const std::size_t begin = sys.block_offsets[a], end = sys.block_offsets[a + 1];
    const double b_in = sys.rhs[static_cast<Eigen::Index>(sys.in_row(a))];
    if (a < n) {
      x[static_cast<Eigen::Index>(sys.block_cols[begin])] = b_in / 2.0;
      continue;
    }
    const double b_od = sys.rhs[static_cast<Eigen::Index>(sys.od_row(a))];
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (std::size_t c = begin; c < end; ++c) {
      const double s = std::sqrt(sys.sigma_sq[sys.block_vars[c]]);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    const bool block_degenerate = hi - lo < options.degenerate_tol * smax;
    degenerate = degenerate || block_degenerate;
    if (!block_degenerate) {
      detail::solve_separated_block(sys, begin, end, b_in, b_od, options.min_norm, x);
      continue;
    }
    b << b_in, b_od;
    const Vector t = detail::solve_block(sys, begin, end, b, options.min_norm);
    for (std::size_t c = begin; c < end; ++c) {
      x[static_cast<Eigen::Index>(sys.block_cols[c])] = t[static_cast<Eigen::Index>(c - begin)];
    }
  }

  CoefficientSolution sol;
  sol.reduced = x;
  sol.rank = in_od_rank(sys, options.degenerate_tol);
  sol.residual = (sys.matrix * x - sys.rhs).norm();
  const double bound = 1e-8 * (1.0 + sys.rhs.norm());
  if (sol.residual > bound) {
    const Vector sigma = sys.sigma_sq.cwiseSqrt();
    const auto pairs = repeated_singular_values(sigma, options.degenerate_tol);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "degree-%d input-normal/output-diagonal system is inconsistent "
                  "(residual %.3g, rank %zu of %zu rows)",
                  sys.k, sol.residual, sol.rank, sys.rows);
    std::string msg = buf;
    if (!pairs.empty()) msg += "; repeated Hankel singular values: " + describe_pairs(pairs, sigma);
    if (!degenerate) throw SolverError(msg);
    if (options.degenerate == DegeneratePolicy::Error) throw DegenerateError(msg);
    warn(warnings, msg + "; using least-squares solution");
  }

  // expand class sums evenly over the class members
  const auto& prev = *sys.map_prev;
  const std::size_t rprev = prev.rows();
  sol.That = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(prev.cols()));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t beta = 0; beta < rprev; ++beta) {
      const double t = x[static_cast<Eigen::Index>(r * rprev + beta)];
      if (t == 0.0) continue;
      const auto support = prev.support(beta);
      const double share = t / static_cast<double>(support.size());
      for (std::size_t c : support) {
        sol.That(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = share;
      }
    }
  }
  return sol;
}

struct DegreeReport {
  int k = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t rank = 0;
  double residual = 0.0;
};

struct InOdResult {
  Transformation transformation;  // final T_i = T1 T^_i
  SingularValueFunctions sigma;
  EnergyExpansion ec;             // transformed, truncated at degree d
  EnergyExpansion eo;
  BalancingFactors factors;
  std::vector<Matrix> That;       // T^_1 = I, T^_2, ...
  std::vector<DegreeReport> degrees;
  Warnings warnings;
};

/// sigma_i^2(z_i) read off the diagonal of the transformed observability
/// coefficients.
inline SingularValueFunctions extract_singular_value_functions(const EnergyExpansion& eo_t,
                                                               MonomialTables* tables = nullptr) {
  MonomialTables local;
  MonomialTables& tab = tables ? *tables : local;
  SingularValueFunctions s;
  s.n = eo_t.n;
  const auto n = static_cast<Eigen::Index>(eo_t.n);
  s.sigma0_sq.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) s.sigma0_sq[i] = eo_t.coeff(2)[i * n + i];
  for (int k = 3; k <= eo_t.d; ++k) {
    s.higher[k - 2] = tab.get(eo_t.n, static_cast<std::size_t>(k))->combine(eo_t.coeff(k)).head(n);
  }
  return s;
}

/// Polynomial input-normal / output-diagonal transformation to degree d.
inline InOdResult compute_in_od_transformation(const EnergyExpansion& ec,
                                               const EnergyExpansion& eo, int d,
                                               const BalanceOptions& options = {}) {
  ec.validate("v");
  eo.validate("w");
  if (ec.n != eo.n) throw InvalidArgument("compute_in_od_transformation: dimension mismatch");
  if (d < 2 || d > ec.d || d > eo.d) {
    throw InvalidArgument("compute_in_od_transformation: degree must be in [2, " +
                          std::to_string(std::min(ec.d, eo.d)) + "]");
  }
  const std::size_t n = ec.n;
  const auto nn = static_cast<Eigen::Index>(n);
  InOdResult res;
  res.factors = linear_balancing(ec.quadratic(), eo.quadratic(), &res.warnings);
  const Vector& sigma = res.factors.Sigma;

  const auto pairs = repeated_singular_values(sigma, options.degenerate_tol);
  if (!pairs.empty()) {
    const std::string msg = "repeated Hankel singular values (distinctness assumption violated): " +
                            describe_pairs(pairs, sigma);
    if (options.degenerate == DegeneratePolicy::Error && d >= 3) throw DegenerateError(msg);
    res.warnings.push_back(msg);
  }

  EnergyExpansion ev_t = EnergyExpansion::zeros(n, d);
  EnergyExpansion ew_t = EnergyExpansion::zeros(n, d);
  for (int k = 2; k <= d; ++k) {
    ev_t.coeff(k) = kron_power_apply(res.factors.T1, ec.coeff(k), k);
    ew_t.coeff(k) = kron_power_apply(res.factors.T1, eo.coeff(k), k);
  }

  res.That = {Matrix(), Matrix::Identity(nn, nn)};
  res.ec = EnergyExpansion::zeros(n, d);
  res.eo = EnergyExpansion::zeros(n, d);
  res.ec.coeff(2) = ev_t.coeff(2);
  res.eo.coeff(2) = ew_t.coeff(2);
  MonomialTables tables;
  for (int k = 3; k <= d; ++k) {
    const InOdSystem sys = assemble_in_od_system(k, res.That, ev_t, ew_t, sigma, &tables);
    CoefficientSolution sol = solve_coefficient(sys, options, &res.warnings);
    res.degrees.push_back({k, sys.rows, sys.cols, sol.rank, sol.residual});
    res.That.push_back(std::move(sol.That));
    // degree-k part of the transformed energies
    Vector vk = Vector::Zero(static_cast<Eigen::Index>(checked_pow(n, static_cast<std::size_t>(k))));
    Vector wk = vk;
    for (int i = 2; i <= k; ++i) {
      vk += calT_transpose_apply(res.That, i, k, ev_t.coeff(i));
      wk += calT_transpose_apply(res.That, i, k, ew_t.coeff(i));
    }
    res.ec.coeff(k) = sys.map_k->symmetrize(vk);
    res.eo.coeff(k) = sys.map_k->symmetrize(wk);
  }

  res.transformation.n = n;
  res.transformation.T.assign(static_cast<std::size_t>(std::max(d, 2)), Matrix());
  for (int i = 1; i <= d - 1; ++i) {
    res.transformation.T[static_cast<std::size_t>(i)] =
        res.factors.T1 * res.That[static_cast<std::size_t>(i)];
  }
  res.sigma = extract_singular_value_functions(res.eo, &tables);
  return res;
}

}  // namespace kronbal
