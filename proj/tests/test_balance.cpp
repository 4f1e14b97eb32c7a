#include <gtest/gtest.h>

#include <chrono>

#include "kronbal/balance.hpp"
#include "kronbal/energy.hpp"
#include "oracle.hpp"

using namespace kronbal;

namespace {

Vector combined_row(const Matrix& T, Eigen::Index row, int k) {
  return DuplicationMap(static_cast<std::size_t>(T.rows()), static_cast<std::size_t>(k))
      .combine(T.row(row).transpose());
}

// Combined coefficients of sum of terms, in the map's row order.
Vector combined(std::size_t n, int k, const std::vector<Term>& terms) {
  return DuplicationMap(n, static_cast<std::size_t>(k)).combine(from_monomials(n, static_cast<std::size_t>(k), terms));
}

EnergyExpansion random_symmetric_expansion(oracle::Rng& rng, std::size_t n, int d, const Matrix& Q) {
  EnergyExpansion e = EnergyExpansion::zeros(n, d);
  e.coeff(2) = Eigen::Map<const Vector>(Q.data(), Q.size());
  for (int k = 3; k <= d; ++k)
    e.coeff(k) = symmetrize(rng.vector(e.coeff(k).size()), n, static_cast<std::size_t>(k));
  return e;
}

Matrix random_spd(oracle::Rng& rng, Eigen::Index n) {
  const Matrix X = rng.matrix(n, n);
  return X * X.transpose() + Matrix::Identity(n, n);
}

}  // namespace

TEST(LinearBalancing, AlreadyBalanced) {
  Matrix W2 = Matrix::Zero(2, 2);
  W2.diagonal() << 4, 1;
  const auto f = linear_balancing(Matrix::Identity(2, 2), W2);
  EXPECT_LE((f.Sigma - Vector::Map(std::vector<double>{2, 1}.data(), 2)).norm(), 1e-14);
  EXPECT_LE((f.T1 - Matrix::Identity(2, 2)).norm(), 1e-14);
}

TEST(LinearBalancing, TwoStateExample) {
  const auto [ec, eo] = fujimoto2d_energy_coeffs();
  const auto f = linear_balancing(ec.quadratic(), eo.quadratic());
  EXPECT_NEAR(f.Sigma[0], 6.0, 1e-14);
  EXPECT_NEAR(f.Sigma[1], 3.0, 1e-14);
}

TEST(LinearBalancing, InvariantsOnRandomGramians) {
  oracle::Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.integer(1, 7);
    const Matrix V2 = random_spd(rng, n), W2 = random_spd(rng, n);
    const auto f = linear_balancing(V2, W2);
    const Matrix M = f.L.transpose() * f.R.transpose().inverse();
    EXPECT_LE((M - f.U * f.Sigma.asDiagonal() * f.V.transpose()).norm(), 1e-10 * M.norm());
    EXPECT_LE((f.R * f.R.transpose() - V2).norm(), 1e-10 * V2.norm());
    EXPECT_LE((f.L * f.L.transpose() - W2).norm(), 1e-10 * W2.norm());
    EXPECT_LE((f.T1.transpose() * V2 * f.T1 - Matrix::Identity(n, n)).norm(), 1e-10);
    const double s2 = f.Sigma.maxCoeff() * f.Sigma.maxCoeff();
    EXPECT_LE((f.T1.transpose() * W2 * f.T1 - Matrix(f.Sigma.array().square().matrix().asDiagonal())).norm(),
              1e-10 * s2);
    EXPECT_LE((f.T1inv - f.Sigma.cwiseInverse().asDiagonal() * f.U.transpose() * f.L.transpose()).norm(),
              1e-10 * (1 + f.T1inv.norm()));
    EXPECT_LE((f.T1inv * f.T1 - Matrix::Identity(n, n)).norm(), 1e-10);
    for (Eigen::Index i = 1; i < n; ++i) EXPECT_GE(f.Sigma[i - 1], f.Sigma[i]);
  }
}

TEST(LinearBalancing, NonSpdIsError) {
  EXPECT_THROW(linear_balancing(-Matrix::Identity(2, 2), Matrix::Identity(2, 2)), SolverError);
}

TEST(LinearBalancing, TinySingularValuesWarn) {
  Matrix W2 = Matrix::Identity(2, 2);
  W2(1, 1) = 1e-30;
  Warnings w;
  linear_balancing(Matrix::Identity(2, 2), W2, &w);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("2"), std::string::npos);
}

TEST(LinearBalancing, DuffingHankelSingularValues) {
  const auto model = duffing_chain(3);
  const auto f = linear_balancing(solve_controllability_quadratic(model.A, model.B),
                                  solve_observability_quadratic(model.A, model.C));
  const double expected[] = {1.2071, 0.5000, 0.3536, 0.3536, 0.2500, 0.2071};
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(f.Sigma[i], expected[i], 5e-5);
}

TEST(LinearBalancing, InvariantUnderSimilarity) {
  oracle::Rng rng(8);
  const auto model = duffing_chain(2);
  const auto base = linear_balancing(solve_controllability_quadratic(model.A, model.B),
                                     solve_observability_quadratic(model.A, model.C));
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix S = rng.matrix(4, 4) + 3 * Matrix::Identity(4, 4);
    const Matrix Sinv = S.inverse();
    const Matrix A = Sinv * model.A * S, B = Sinv * model.B, C = model.C * S;
    const auto f = linear_balancing(solve_controllability_quadratic(A, B),
                                    solve_observability_quadratic(A, C));
    EXPECT_LE((f.Sigma - base.Sigma).norm(), 1e-8);
  }
}

TEST(TransformCoefficients, IdentityIsNoOp) {
  oracle::Rng rng(2);
  const auto e = random_symmetric_expansion(rng, 3, 4, random_spd(rng, 3));
  const auto t = transform_coefficients(e, Matrix::Identity(3, 3));
  for (int k = 2; k <= 4; ++k) EXPECT_EQ(t.coeff(k), e.coeff(k));
}

TEST(TransformCoefficients, QuadraticsBecomeBalanced) {
  oracle::Rng rng(3);
  const Matrix V2 = random_spd(rng, 4), W2 = random_spd(rng, 4);
  const auto f = linear_balancing(V2, W2);
  EnergyExpansion ev = EnergyExpansion::zeros(4, 2), ew = EnergyExpansion::zeros(4, 2);
  ev.coeff(2) = Eigen::Map<const Vector>(V2.data(), 16);
  ew.coeff(2) = Eigen::Map<const Vector>(W2.data(), 16);
  EXPECT_LE((transform_coefficients(ev, f.T1).quadratic() - Matrix::Identity(4, 4)).norm(), 1e-10);
  EXPECT_LE((transform_coefficients(ew, f.T1).quadratic() -
             Matrix(f.Sigma.array().square().matrix().asDiagonal())).norm(),
            1e-10 * f.Sigma[0] * f.Sigma[0]);
}

TEST(TransformCoefficients, CubicAgainstDense) {
  oracle::Rng rng(4);
  EnergyExpansion e = EnergyExpansion::zeros(2, 3);
  e.coeff(3) = rng.vector(8);
  const Matrix T1 = rng.matrix(2, 2);
  const Vector expected = oracle::kron_power(T1, 3).transpose() * e.coeff(3);
  EXPECT_LE(oracle::rel_err(transform_coefficients(e, T1).coeff(3), expected), 1e-12);
}

TEST(InOdSystem, Dimensions) {
  const struct { std::size_t n; int k; std::size_t rows, cols; } cases[] = {
      {2, 3, 6, 6}, {3, 3, 17, 18}, {2, 4, 8, 8}, {3, 4, 27, 30}};
  oracle::Rng rng(5);
  for (const auto& c : cases) {
    Vector sigma = Vector::LinSpaced(static_cast<Eigen::Index>(c.n), 3.0, 1.0);
    const auto ev = EnergyExpansion::zeros(c.n, c.k), ew = EnergyExpansion::zeros(c.n, c.k);
    std::vector<Matrix> That{Matrix(), Matrix::Identity(c.n, c.n)};
    for (int i = 2; i <= c.k - 2; ++i) That.push_back(Matrix::Zero(c.n, oracle::ipow(c.n, i)));
    const auto sys = assemble_in_od_system(c.k, That, ev, ew, sigma);
    EXPECT_EQ(sys.rows, c.rows);
    EXPECT_EQ(sys.cols, c.cols);
    EXPECT_EQ(sys.rows, in_od_row_count(c.n, c.k));
    EXPECT_EQ(sys.cols, in_od_col_count(c.n, c.k));
    EXPECT_EQ(static_cast<std::size_t>(sys.matrix.rows()), c.rows);
    EXPECT_EQ(static_cast<std::size_t>(sys.matrix.cols()), c.cols);
  }
}

TEST(InOdSystem, FullRowRankWithDistinctSigma) {
  oracle::Rng rng(6);
  for (std::size_t n = 2; n <= 4; ++n) {
    for (int k = 3; k <= 4; ++k) {
      Vector sigma(static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < sigma.size(); ++i) sigma[i] = rng.uniform(0.1, 2.0);
      std::sort(sigma.begin(), sigma.end(), std::greater<>());
      MonomialTables tables;
      const auto sys = detail::in_od_structure(n, k, sigma, tables);
      const Matrix dense = Matrix(sys.matrix);
      Eigen::JacobiSVD<Matrix> svd(dense);
      svd.setThreshold(1e-10);
      EXPECT_EQ(static_cast<std::size_t>(svd.rank()), sys.rows) << "n=" << n << " k=" << k;
      EXPECT_EQ(in_od_rank(sys), sys.rows);
    }
  }
}

TEST(InOdSystem, RepeatedSigmaLosesRank) {
  Vector sigma(3);
  sigma << 2.0, 1.0, 1.0;
  MonomialTables tables;
  const auto sys = detail::in_od_structure(3, 3, sigma, tables);
  Eigen::JacobiSVD<Matrix> svd{Matrix(sys.matrix)};
  svd.setThreshold(1e-10);
  EXPECT_LT(static_cast<std::size_t>(svd.rank()), sys.rows);
  EXPECT_EQ(in_od_rank(sys), static_cast<std::size_t>(svd.rank()));
}

TEST(InOdSystem, MatrixMatchesDenseEquations) {
  // columns of the dense operator [2 N_k; 2 N~_k (I (x) Sigma^2)] restricted to
  // row-symmetric T^ reproduce the reduced matrix
  oracle::Rng rng(7);
  for (std::size_t n = 2; n <= 3; ++n) {
    for (int k = 3; k <= 4; ++k) {
      Vector sigma = Vector::LinSpaced(static_cast<Eigen::Index>(n), 2.0, 0.5);
      MonomialTables tables;
      const auto sys = detail::in_od_structure(n, k, sigma, tables);
      const Matrix N = oracle::duplication_matrix(n, k);
      const auto rk = N.rows();
      const auto nn = static_cast<Eigen::Index>(n);
      Matrix S2 = Matrix::Zero(nn, nn);
      S2.diagonal() = sigma.array().square();
      const Matrix Ikm1 = Matrix::Identity(oracle::ipow(n, k - 1), oracle::ipow(n, k - 1));
      Matrix dense(2 * rk - nn, N.cols());
      dense.topRows(rk) = 2 * N;
      dense.bottomRows(rk - nn) = 2 * N.bottomRows(rk - nn) * oracle::kron(Ikm1, S2);
      const DuplicationMap prev(n, static_cast<std::size_t>(k - 1));
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t b = 0; b < prev.rows(); ++b) {
          // T^ with class sum 1 at (r, b): vec index = col * n + r
          Vector t = Vector::Zero(N.cols());
          for (auto c : prev.support(b))
            t[static_cast<Eigen::Index>(c * n + r)] = 1.0 / static_cast<double>(prev.support(b).size());
          const Vector expected = dense * t;
          const Vector actual = Matrix(sys.matrix).col(static_cast<Eigen::Index>(r * prev.rows() + b));
          EXPECT_LE((expected - actual).norm(), 1e-13);
        }
      }
    }
  }
}

TEST(InOdSystem, QuarticRhsWithOnlyTopCoefficients) {
  oracle::Rng rng(8);
  EnergyExpansion ev = EnergyExpansion::zeros(2, 4), ew = EnergyExpansion::zeros(2, 4);
  ev.coeff(4) = symmetrize(rng.vector(16), 2, 4);
  ew.coeff(4) = symmetrize(rng.vector(16), 2, 4);
  std::vector<Matrix> That{Matrix(), Matrix::Identity(2, 2), Matrix::Zero(2, 4)};
  Vector sigma(2);
  sigma << 2, 1;
  const auto sys = assemble_in_od_system(4, That, ev, ew, sigma);
  const Matrix N = oracle::duplication_matrix(2, 4);
  Vector expected(8);
  expected.head(5) = -N * ev.coeff(4);
  expected.tail(3) = -(N.bottomRows(3) * ew.coeff(4));
  EXPECT_LE((sys.rhs - expected).norm(), 1e-13);
}

TEST(InOdSystem, MissingPrerequisiteIsError) {
  const auto e = EnergyExpansion::zeros(2, 5);
  std::vector<Matrix> That{Matrix(), Matrix::Identity(2, 2)};
  EXPECT_THROW(assemble_in_od_system(5, That, e, e, Vector::Ones(2)), InvalidArgument);
}

TEST(SolveCoefficient, ZeroRhsGivesZero) {
  Vector sigma(3);
  sigma << 3, 2, 1;
  const auto e = EnergyExpansion::zeros(3, 3);
  const auto sys = assemble_in_od_system(3, {Matrix(), Matrix::Identity(3, 3)}, e, e, sigma);
  const auto sol = solve_coefficient(sys);
  EXPECT_EQ(sol.That.norm(), 0.0);
  EXPECT_EQ(sol.residual, 0.0);
}

TEST(SolveCoefficient, SquareSystemMatchesDenseOracle) {
  // n = 2, k = 3: full unknown vec(T^_2) with row-symmetry constraints
  oracle::Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    EnergyExpansion ev = EnergyExpansion::zeros(2, 3), ew = EnergyExpansion::zeros(2, 3);
    ev.coeff(3) = symmetrize(rng.vector(8), 2, 3);
    ew.coeff(3) = symmetrize(rng.vector(8), 2, 3);
    Vector sigma(2);
    sigma << rng.uniform(1.5, 3), rng.uniform(0.2, 1.4);
    const auto sys = assemble_in_od_system(3, {Matrix(), Matrix::Identity(2, 2)}, ev, ew, sigma);
    const auto sol = solve_coefficient(sys);

    const Matrix N = oracle::duplication_matrix(2, 3);
    Matrix S2 = Matrix::Zero(2, 2);
    S2.diagonal() = sigma.array().square();
    Matrix dense = Matrix::Zero(6 + 2, 8);
    dense.topRows(4) = 2 * N;
    dense.middleRows(4, 2) = 2 * N.bottomRows(2) * oracle::kron(Matrix::Identity(4, 4), S2);
    // T^_2[r, (0,1)] = T^_2[r, (1,0)]: vec index col * 2 + r, cols 1 and 2
    for (int r = 0; r < 2; ++r) {
      dense(6 + r, 1 * 2 + r) = 1;
      dense(6 + r, 2 * 2 + r) = -1;
    }
    Vector rhs = Vector::Zero(8);
    rhs.head(4) = -N * ev.coeff(3);
    rhs.segment(4, 2) = -(N.bottomRows(2) * ew.coeff(3));
    const Vector x = dense.fullPivLu().solve(rhs);
    const Matrix expected = Eigen::Map<const Matrix>(x.data(), 2, 4);
    EXPECT_LE((sol.That - expected).norm(), 1e-10 * (1 + expected.norm()));
  }
}

TEST(SolveCoefficient, UnderdeterminedSolutionsSatisfyEquations) {
  oracle::Rng rng(10);
  for (const bool min_norm : {false, true}) {
    EnergyExpansion ev = EnergyExpansion::zeros(3, 4), ew = EnergyExpansion::zeros(3, 4);
    for (int k = 3; k <= 4; ++k) {
      ev.coeff(k) = symmetrize(rng.vector(ev.coeff(k).size()), 3, k);
      ew.coeff(k) = symmetrize(rng.vector(ew.coeff(k).size()), 3, k);
    }
    Vector sigma(3);
    sigma << 3, 2, 1;
    const auto sys = assemble_in_od_system(3, {Matrix(), Matrix::Identity(3, 3)}, ev, ew, sigma);
    BalanceOptions opts;
    opts.min_norm = min_norm;
    const auto sol = solve_coefficient(sys, opts);
    EXPECT_LE(sol.residual, 1e-8 * (1 + sys.rhs.norm()));
    for (Eigen::Index r = 0; r < 3; ++r)
      EXPECT_LE((symmetrize(sol.That.row(r).transpose(), 3, 2) - sol.That.row(r).transpose()).norm(), 1e-14);
    if (min_norm) {
      // minimum norm among reduced solutions: orthogonal to the null space
      Eigen::FullPivLU<Matrix> lu{Matrix(sys.matrix)};
      const Matrix null = lu.kernel();
      EXPECT_LE((null.transpose() * sol.reduced).norm(), 1e-10);
    } else {
      // basic solution: the single free unknown is set to zero
      EXPECT_GE((sol.reduced.array() == 0.0).count(), 1);
    }
  }
}

TEST(SolveCoefficient, InconsistentDegenerateBlockWarnsOrThrows) {
  oracle::Rng rng(11);
  EnergyExpansion ev = EnergyExpansion::zeros(3, 3), ew = EnergyExpansion::zeros(3, 3);
  ev.coeff(3) = symmetrize(rng.vector(27), 3, 3);
  ew.coeff(3) = symmetrize(rng.vector(27), 3, 3);
  Vector sigma(3);
  sigma << 2, 1, 1;
  const auto sys = assemble_in_od_system(3, {Matrix(), Matrix::Identity(3, 3)}, ev, ew, sigma);
  Warnings w;
  const auto sol = solve_coefficient(sys, {}, &w);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("sigma_2"), std::string::npos);
  EXPECT_GT(sol.residual, 1e-8);
  BalanceOptions strict;
  strict.degenerate = DegeneratePolicy::Error;
  EXPECT_THROW(solve_coefficient(sys, strict), DegenerateError);
}

TEST(InOdTransformation, TwoStateExampleCoefficients) {
  const auto start = std::chrono::steady_clock::now();
  const auto [ec, eo] = fujimoto2d_energy_coeffs();
  const auto res = compute_in_od_transformation(ec, eo, 6);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(elapsed, 1.0);
  EXPECT_TRUE(res.warnings.empty());

  const auto& T = res.transformation.T;
  ASSERT_EQ(res.transformation.max_degree(), 5);
  EXPECT_LE((T[1] - Matrix::Identity(2, 2)).norm(), 1e-9);
  EXPECT_LE(T[2].cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(T[4].cwiseAbs().maxCoeff(), 1e-9);
  const double third = 1.0 / 3.0, eighteenth = 1.0 / 18.0;
  const Vector row1_3 = combined(2, 3, {{{0, 3}, -third}, {{2, 1}, -third}});
  const Vector row2_3 = combined(2, 3, {{{3, 0}, third}, {{1, 2}, third}});
  const Vector row1_5 = combined(2, 5, {{{5, 0}, -eighteenth}, {{3, 2}, 11.0 / 9.0}, {{1, 4}, 5.0 / 6.0}});
  const Vector row2_5 = combined(2, 5, {{{0, 5}, -eighteenth}, {{4, 1}, -25.0 / 18.0}, {{2, 3}, -1.0}});
  EXPECT_LE((combined_row(T[3], 0, 3) - row1_3).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((combined_row(T[3], 1, 3) - row2_3).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((combined_row(T[5], 0, 5) - row1_5).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((combined_row(T[5], 1, 5) - row2_5).cwiseAbs().maxCoeff(), 1e-9);

  EXPECT_NEAR(res.sigma.sigma0_sq[0], 36.0, 1e-9);
  EXPECT_NEAR(res.sigma.sigma0_sq[1], 9.0, 1e-9);
  for (int j = 1; j <= 4; ++j) {
    const double e1 = j == 4 ? -32.0 : 0.0, e2 = j == 4 ? -8.0 : 0.0;
    EXPECT_NEAR(res.sigma.higher.at(j)[0], e1, 1e-9) << j;
    EXPECT_NEAR(res.sigma.higher.at(j)[1], e2, 1e-9) << j;
  }
}

TEST(InOdTransformation, ClosedFormMapAtUnitPoints) {
  const auto [ec, eo] = fujimoto2d_energy_coeffs();
  const auto res = compute_in_od_transformation(ec, eo, 6);
  const Vector x1 = evaluate_transformation(res.transformation, Vector(Vector::Unit(2, 0)));
  const Vector x2 = evaluate_transformation(res.transformation, Vector(Vector::Unit(2, 1)));
  EXPECT_NEAR(x1[0], 1 - 1.0 / 18, 1e-9);
  EXPECT_NEAR(x1[1], 1.0 / 3, 1e-9);
  EXPECT_NEAR(x2[0], -1.0 / 3, 1e-9);
  EXPECT_NEAR(x2[1], 1 - 1.0 / 18, 1e-9);
}

TEST(InOdTransformation, LinearSystemGivesClassicalBalancing) {
  PolynomialDynamics model = duffing_chain(2);
  model.F.clear();
  const auto ec = solve_energy_expansion(model, 4, EnergyKind::Controllability);
  const auto eo = solve_energy_expansion(model, 4, EnergyKind::Observability);
  const auto res = compute_in_od_transformation(ec, eo, 4);
  EXPECT_EQ(res.transformation.T[2].norm(), 0.0);
  EXPECT_EQ(res.transformation.T[3].norm(), 0.0);
  for (int j = 1; j <= 2; ++j) EXPECT_EQ(res.sigma.higher.at(j).norm(), 0.0);
  EXPECT_LE((res.sigma.sigma0_sq - res.factors.Sigma.array().square().matrix()).norm(), 1e-12);
}

TEST(InOdTransformation, SampledInputNormalOutputDiagonalProperty) {
  // E_c(Phi(z)) - z^T z / 2 and E_o(Phi(z)) - sum z_i^2 sigma_i^2(z_i) / 2 are
  // O(|z|^{d+1})
  const auto model = duffing_chain(2, Topology::Chain);
  const int d = 4;
  const auto ec = solve_energy_expansion(model, d, EnergyKind::Controllability);
  const auto eo = solve_energy_expansion(model, d, EnergyKind::Observability);
  const auto res = compute_in_od_transformation(ec, eo, d);
  oracle::Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector u = rng.unit(4);
    for (double eps : {1e-1, 5e-2, 2.5e-2}) {
      const Vector z = eps * u;
      const Vector x = evaluate_transformation(res.transformation, z);
      double diag = 0;
      for (std::size_t i = 0; i < 4; ++i)
        diag += z[static_cast<Eigen::Index>(i)] * z[static_cast<Eigen::Index>(i)] *
                res.sigma.evaluate(i, z[static_cast<Eigen::Index>(i)]);
      const double K = 1e3;
      EXPECT_LE(std::abs(evaluate_energy(ec, x) - 0.5 * z.squaredNorm()), K * std::pow(eps, d + 1));
      EXPECT_LE(std::abs(evaluate_energy(eo, x) - 0.5 * diag), K * std::pow(eps, d + 1));
    }
  }
}

TEST(InOdTransformation, DegenerateHsvWarnsOrThrows) {
  const auto model = duffing_chain(3);
  const auto ec = solve_energy_expansion(model, 4, EnergyKind::Controllability);
  const auto eo = solve_energy_expansion(model, 4, EnergyKind::Observability);
  const auto res = compute_in_od_transformation(ec, eo, 4);
  ASSERT_FALSE(res.warnings.empty());
  EXPECT_NE(res.warnings[0].find("repeated Hankel singular values"), std::string::npos);
  BalanceOptions strict;
  strict.degenerate = DegeneratePolicy::Error;
  EXPECT_THROW(compute_in_od_transformation(ec, eo, 4, strict), DegenerateError);
}

TEST(SingularValueFunctions, SyntheticDiagonalCubic) {
  EnergyExpansion eo = EnergyExpansion::zeros(2, 3);
  eo.coeff(2) << 4, 0, 0, 1;
  eo.coeff(3) = from_monomials(2, 3, {{{3, 0}, 0.7}});
  const auto s = extract_singular_value_functions(eo);
  EXPECT_DOUBLE_EQ(s.higher.at(1)[0], 0.7);
  EXPECT_DOUBLE_EQ(s.higher.at(1)[1], 0.0);
}

TEST(ComposeEnergy, RecoversTransformedEnergiesFromFinalTransformation) {
  oracle::Rng rng(77);
  const std::size_t n = 3;
  const Matrix V2 = random_spd(rng, 3), W2 = random_spd(rng, 3);
  const auto ec = random_symmetric_expansion(rng, n, 4, V2);
  const auto eo = random_symmetric_expansion(rng, n, 4, W2);
  const auto res = compute_in_od_transformation(ec, eo, 4);
  const auto vc = compose_energy(ec, res.transformation, 4);
  const auto vo = compose_energy(eo, res.transformation, 4);
  for (int k = 2; k <= 4; ++k) {
    EXPECT_LE((vc.coeff(k) - res.ec.coeff(k)).norm(), 1e-10 * (1 + res.ec.coeff(k).norm())) << k;
    EXPECT_LE((vo.coeff(k) - res.eo.coeff(k)).norm(), 1e-10 * (1 + res.eo.coeff(k).norm())) << k;
  }
}

TEST(ComposeEnergy, AgainstDenseComposition) {
  oracle::Rng rng(78);
  EnergyExpansion e = EnergyExpansion::zeros(2, 4);
  for (int k = 2; k <= 4; ++k) e.coeff(k) = symmetrize(rng.vector(e.coeff(k).size()), 2, static_cast<std::size_t>(k));
  Transformation t{2, {Matrix(), rng.matrix(2, 2), rng.matrix(2, 4)}};
  const auto out = compose_energy(e, t, 4);
  for (int k = 2; k <= 4; ++k) {
    Vector expected = Vector::Zero(out.coeff(k).size());
    for (int i = 2; i <= k; ++i) {
      std::vector<Matrix> T = {Matrix(), t.T[1], t.T[2], Matrix::Zero(2, 8)};
      expected += oracle::calT(T, i, k).transpose() * e.coeff(i);
    }
    EXPECT_LE((out.coeff(k) - oracle::symmetrize(expected, 2, k)).norm(), 1e-12 * (1 + expected.norm()));
  }
}
