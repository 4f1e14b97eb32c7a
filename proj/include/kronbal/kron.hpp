#pragma once

// Kronecker-product tensor algebra on coefficient vectors of homogeneous
// polynomials.  A degree-k coefficient w in R^{n^k} represents w^T x^{(k)},
// where x^{(k)} = x (x) ... (x) x and entry i_1 n^{k-1} + ... + i_k holds the
// monomial x_{i_1} ... x_{i_k} (base-n digits, most significant first).

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kronbal/errors.hpp"

namespace kronbal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Every Kronecker dimension must be addressable by Eigen's signed index.
inline constexpr std::size_t kMaxEntries =
    static_cast<std::size_t>(std::numeric_limits<Eigen::Index>::max());

inline std::size_t checked_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > kMaxEntries / a) {
    throw CapacityError("size " + std::to_string(a) + " * " +
                        std::to_string(b) + " exceeds addressable range");
  }
  return a * b;
}

inline std::size_t checked_pow(std::size_t base, std::size_t exponent) {
  std::size_t result = 1;
  for (std::size_t i = 0; i < exponent; ++i) result = checked_mul(result, base);
  return result;
}

inline std::size_t checked_binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 result = 1;
  for (std::size_t i = 0; i < k; ++i) {
    result = result * (n - i) / (i + 1);
    if (result > kMaxEntries) {
      throw CapacityError("binomial C(" + std::to_string(n) + "," +
                          std::to_string(k) + ") exceeds addressable range");
    }
  }
  return static_cast<std::size_t>(result);
}

/// Number of unique degree-k monomials in n variables, C(n+k-1, k).
inline std::size_t monomial_count(std::size_t n, std::size_t k) {
  return checked_binomial(n + k - 1, k);
}

/// One entry of x^{(k)}.
struct MonomialIndex {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<int> exponents;  // length n, sums to k
  std::vector<int> factors;    // variable of each Kronecker factor, in order
  std::size_t linear_index = 0;

  bool is_diagonal() const {
    return std::count_if(exponents.begin(), exponents.end(),
                         [](int e) { return e != 0; }) == 1;
  }
};

inline MonomialIndex monomial_unrank(std::size_t linear_index, std::size_t n,
                                     std::size_t k) {
  if (n == 0) throw InvalidArgument("monomial_unrank: n must be positive");
  const std::size_t size = checked_pow(n, k);
  if (linear_index >= size) {
    throw InvalidArgument("monomial_unrank: index " +
                          std::to_string(linear_index) + " out of range [0, " +
                          std::to_string(size) + ")");
  }
  MonomialIndex m{n, k, std::vector<int>(n, 0), std::vector<int>(k, 0),
                  linear_index};
  std::size_t rest = linear_index;
  for (std::size_t pos = k; pos-- > 0;) {
    const auto digit = static_cast<int>(rest % n);
    rest /= n;
    m.factors[pos] = digit;
    ++m.exponents[digit];
  }
  return m;
}

/// Linear position in x^{(k)} of the ordered factor sequence.
inline std::size_t factors_to_index(std::span<const int> factors,
                                    std::size_t n) {
  std::size_t index = 0;
  for (int f : factors) index = index * n + static_cast<std::size_t>(f);
  return index;
}

/// The duplication map N_k: groups the n^k Kronecker slots into classes of
/// equal monomials.  Rows 0..n-1 are the diagonal monomials x_1^k .. x_n^k;
/// the off-diagonal rows follow in graded-lexicographic order of their
/// exponent vectors (x_1 heaviest first).  Stored as row supports only.
class DuplicationMap {
 public:
  DuplicationMap(std::size_t n, std::size_t k) : n_(n), k_(k) {
    if (n == 0 || k == 0) {
      throw InvalidArgument("DuplicationMap: n and k must be positive");
    }
    cols_ = checked_pow(n, k);
    rows_ = monomial_count(n, k);
    factors_.assign(rows_ * k, 0);
    offsets_.assign(rows_ + 1, 0);

    // Nondecreasing factor sequences in lexicographic order are exactly the
    // exponent vectors in descending lexicographic order.
    std::vector<int> seq(k, 0);
    std::size_t next_off_diagonal = n;
    while (true) {
      const std::size_t row = seq.front() == seq.back()
                                  ? static_cast<std::size_t>(seq.front())
                                  : next_off_diagonal++;
      std::copy(seq.begin(), seq.end(), factors_.begin() + row * k);
      offsets_[row + 1] = class_size(seq);

      std::size_t p = k;
      while (p > 0 && seq[p - 1] == static_cast<int>(n) - 1) --p;
      if (p == 0) break;
      const int v = seq[p - 1] + 1;
      std::fill(seq.begin() + static_cast<std::ptrdiff_t>(p - 1), seq.end(), v);
    }
    for (std::size_t r = 0; r < rows_; ++r) offsets_[r + 1] += offsets_[r];

    indices_.resize(cols_);
    row_of_.resize(cols_);
    std::vector<int> perm(k);
    for (std::size_t r = 0; r < rows_; ++r) {
      auto f = factors(r);
      std::copy(f.begin(), f.end(), perm.begin());
      std::size_t pos = offsets_[r];
      // next_permutation visits distinct arrangements in increasing
      // lexicographic order, i.e. increasing linear index.
      do {
        const std::size_t idx = factors_to_index(perm, n);
        indices_[pos++] = idx;
        row_of_[idx] = r;
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }

  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool is_diagonal(std::size_t row) const { return row < n_; }

  std::span<const std::size_t> support(std::size_t row) const {
    return {indices_.data() + offsets_[row], offsets_[row + 1] - offsets_[row]};
  }

  /// Sorted variable indices of the monomial in `row`.
  std::span<const int> factors(std::size_t row) const {
    return {factors_.data() + row * k_, k_};
  }

  std::vector<int> exponents(std::size_t row) const {
    std::vector<int> e(n_, 0);
    for (int f : factors(row)) ++e[f];
    return e;
  }

  std::size_t row_of(std::size_t linear_index) const {
    return row_of_.at(linear_index);
  }

  /// N_k w: sums each class of duplicated slots.
  Vector combine(const Vector& w) const {
    check_length(w.size(), "combine");
    Vector out(static_cast<Eigen::Index>(rows_));
    for (std::size_t r = 0; r < rows_; ++r) {
      double s = 0.0;
      for (std::size_t c : support(r)) s += w[static_cast<Eigen::Index>(c)];
      out[static_cast<Eigen::Index>(r)] = s;
    }
    return out;
  }

  /// The off-diagonal rows of N_k w (rows n.. of combine()).
  Vector combine_off_diagonal(const Vector& w) const {
    const Vector all = combine(w);
    return all.tail(static_cast<Eigen::Index>(rows_ - n_));
  }

  /// Replaces every class by its mean; the represented polynomial is unchanged.
  Vector symmetrize(const Vector& v) const {
    check_length(v.size(), "symmetrize");
    Vector out(v.size());
    for (std::size_t r = 0; r < rows_; ++r) {
      const auto sup = support(r);
      double s = 0.0;
      for (std::size_t c : sup) s += v[static_cast<Eigen::Index>(c)];
      s /= static_cast<double>(sup.size());
      for (std::size_t c : sup) out[static_cast<Eigen::Index>(c)] = s;
    }
    return out;
  }

  /// x-bar^{(k)}: the unique monomials of x in row order.
  template <class Scalar>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> minimal_monomials(
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) const {
    if (static_cast<std::size_t>(x.size()) != n_) {
      throw InvalidArgument("minimal_monomials: expected length " +
                            std::to_string(n_));
    }
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(
        static_cast<Eigen::Index>(rows_));
    for (std::size_t r = 0; r < rows_; ++r) {
      Scalar p(1);
      for (int f : factors(r)) p *= x[f];
      out[static_cast<Eigen::Index>(r)] = p;
    }
    return out;
  }

 private:
  std::size_t class_size(const std::vector<int>& seq) const {
    // multinomial k! / prod(run!) as a product of binomials
    std::size_t size = 1;
    std::size_t remaining = k_;
    std::size_t i = 0;
    while (i < seq.size()) {
      std::size_t j = i;
      while (j < seq.size() && seq[j] == seq[i]) ++j;
      size = checked_mul(size, checked_binomial(remaining, j - i));
      remaining -= j - i;
      i = j;
    }
    return size;
  }

  void check_length(Eigen::Index size, const char* what) const {
    if (static_cast<std::size_t>(size) != cols_) {
      throw InvalidArgument(std::string(what) + ": expected length " +
                            std::to_string(cols_) + ", got " +
                            std::to_string(size));
    }
  }

  std::size_t n_;
  std::size_t k_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<int> factors_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> indices_;
  std::vector<std::size_t> row_of_;
};

inline DuplicationMap build_duplication_map(std::size_t n, std::size_t k) {
  return DuplicationMap(n, k);
}

/// Memo of duplication maps for one computation; not thread safe.
class MonomialTables {
 public:
  std::shared_ptr<const DuplicationMap> get(std::size_t n, std::size_t k) {
    auto& slot = maps_[{n, k}];
    if (!slot) slot = std::make_shared<const DuplicationMap>(n, k);
    return slot;
  }

 private:
  std::map<std::pair<std::size_t, std::size_t>,
           std::shared_ptr<const DuplicationMap>>
      maps_;
};

inline Vector symmetrize(const Vector& v, std::size_t n, std::size_t k) {
  return DuplicationMap(n, k).symmetrize(v);
}

/// x^{(k)} as a dense vector of length n^k.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> kron_power(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x, int k) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const auto n = x.size();
  const auto total = static_cast<Eigen::Index>(
      checked_pow(static_cast<std::size_t>(n), static_cast<std::size_t>(k)));
  Vec out(total);
  if (k == 0) {
    out[0] = Scalar(1);
    return out;
  }
  out.head(n) = x;
  Eigen::Index len = n;
  for (int level = 1; level < k; ++level) {
    // out[i*n + j] = prev[i] * x[j], filled back to front so prev stays intact
    for (Eigen::Index i = len; i-- > 0;) {
      const Scalar a = out[i];
      for (Eigen::Index j = n; j-- > 0;) out[i * n + j] = a * x[j];
    }
    len *= n;
  }
  return out;
}

namespace detail {

template <class Scalar>
struct KronFactor {
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>* matrix = nullptr;
  bool identity = false;
  Eigen::Index cols() const { return matrix->cols(); }
};

// out = (F_1 (x) F_2 (x) ... (x) F_m)^T in, each F_j having n rows.
// Each round peels the least significant digit with
// (B^T (x) A) vec(X) = vec(A X B): for X = reshape(cur, n, rest),
// X^T F_j applies F_j^T to that digit and stores the new digit most
// significant, so after m rounds the digits are back in order.
template <class Scalar>
void apply_transposed(std::span<const KronFactor<Scalar>> factors,
                      Eigen::Index n, const Scalar* in, Scalar* out) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const std::size_t m = factors.size();
  Eigen::Index len = 1;
  for (std::size_t j = 0; j < m; ++j) len *= n;
  Vec buffers[2];
  const Scalar* cur = in;
  for (std::size_t round = 0; round < m; ++round) {
    const KronFactor<Scalar>& f = factors[m - 1 - round];
    const Eigen::Index other = len / n;
    Scalar* dst = out;
    if (round + 1 < m) {
      Vec& buf = buffers[round % 2];
      buf.resize(other * f.cols());
      dst = buf.data();
    }
    Eigen::Map<const Mat> x(cur, n, other);
    Eigen::Map<Mat> y(dst, other, f.cols());
    if (f.identity) {
      y = x.transpose();
    } else {
      y.noalias() = x.transpose() * (*f.matrix);
    }
    len = other * f.cols();
    cur = dst;
  }
}

}  // namespace detail

/// (M^{(k)})^T v without forming the Kronecker power; O(k n^{k+1}).
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> kron_power_apply(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v, int k) {
  if (m.rows() != m.cols()) {
    throw InvalidArgument("kron_power_apply: matrix must be square");
  }
  if (k < 1) throw InvalidArgument("kron_power_apply: k must be >= 1");
  const auto n = static_cast<std::size_t>(m.rows());
  const std::size_t len = checked_pow(n, static_cast<std::size_t>(k));
  if (static_cast<std::size_t>(v.size()) != len) {
    throw InvalidArgument("kron_power_apply: expected vector of length " +
                          std::to_string(len) + ", got " +
                          std::to_string(v.size()));
  }
  const detail::KronFactor<Scalar> factor{&m, m.isIdentity(0.0)};
  const std::vector<detail::KronFactor<Scalar>> factors(
      static_cast<std::size_t>(k), factor);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(v.size());
  detail::apply_transposed<Scalar>(factors, m.rows(), v.data(), out.data());
  return out;
}

inline std::size_t composition_count(int l, int m) {
  if (m < 1 || l < m) return 0;
  return checked_binomial(static_cast<std::size_t>(l - 1),
                          static_cast<std::size_t>(m - 1));
}

namespace detail {

template <class F>
void compositions(std::vector<int>& parts, std::size_t pos, int remaining,
                  F& f) {
  const auto slots = static_cast<int>(parts.size() - pos);
  if (slots == 1) {
    parts[pos] = remaining;
    f(std::span<const int>(parts));
    return;
  }
  for (int v = 1; v <= remaining - (slots - 1); ++v) {
    parts[pos] = v;
    compositions(parts, pos + 1, remaining - v, f);
  }
}

}  // namespace detail

/// Calls f(parts) for every ordered composition of l into m positive parts,
/// in lexicographic order.
template <class F>
void for_each_composition(int l, int m, F&& f) {
  if (m < 1 || l < m) return;
  std::vector<int> parts(static_cast<std::size_t>(m), 0);
  detail::compositions(parts, 0, l, f);
}

/// T_{m,l}^T v, where T_{m,l} sums T_{p_1} (x) ... (x) T_{p_m} over the
/// compositions p of l into m parts.  T[i] is the n x n^i coefficient T_i
/// (T[0] is ignored).  v has length n^m, the result length n^l.
inline Vector calT_transpose_apply(const std::vector<Matrix>& T, int m, int l,
                                   const Vector& v) {
  if (m < 1 || l < m) {
    throw InvalidArgument("calT_transpose_apply: need 1 <= m <= l");
  }
  const std::size_t top = static_cast<std::size_t>(l - m + 1);
  if (T.size() <= top) {
    throw InvalidArgument("calT_transpose_apply: missing T_" +
                          std::to_string(top));
  }
  const Eigen::Index n = T[1].rows();
  const auto nn = static_cast<std::size_t>(n);
  for (std::size_t i = 1; i <= top; ++i) {
    if (T[i].rows() != n ||
        static_cast<std::size_t>(T[i].cols()) != checked_pow(nn, i)) {
      throw InvalidArgument("calT_transpose_apply: T_" + std::to_string(i) +
                            " must be n x n^" + std::to_string(i));
    }
  }
  if (static_cast<std::size_t>(v.size()) !=
      checked_pow(nn, static_cast<std::size_t>(m))) {
    throw InvalidArgument("calT_transpose_apply: vector length mismatch");
  }
  const auto out_len = static_cast<Eigen::Index>(
      checked_pow(nn, static_cast<std::size_t>(l)));

  std::vector<char> identity(top + 1, 0), zero(top + 1, 0);
  for (std::size_t i = 1; i <= top; ++i) {
    identity[i] = i == 1 && T[i].isIdentity(0.0);
    zero[i] = T[i].isZero(0.0);
  }

  Vector out = Vector::Zero(out_len);
  Vector term(out_len);
  std::vector<detail::KronFactor<double>> factors(static_cast<std::size_t>(m));
  for_each_composition(l, m, [&](std::span<const int> parts) {
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const auto p = static_cast<std::size_t>(parts[j]);
      if (zero[p]) return;
      factors[j] = {&T[p], static_cast<bool>(identity[p])};
    }
    detail::apply_transposed<double>(factors, n, v.data(), term.data());
    out += term;
  });
  return out;
}

}  // namespace kronbal
