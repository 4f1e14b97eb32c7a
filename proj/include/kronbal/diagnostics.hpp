#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <new>
#include <ostream>
#include <string>
#include <vector>

#include "kronbal/balance.hpp"
#include "kronbal/energy.hpp"
#include "kronbal/errors.hpp"
#include "kronbal/kron.hpp"
#include "kronbal/model.hpp"

namespace kronbal {

/// Distance of transformed energies from input-normal / output-diagonal form,
/// measured on combined (unique-monomial) coefficients.
struct DiagnosticsReport {
  std::size_t n = 0;
  int d = 0;
  double in_normal_quad = 0.0;           // |v~_2 - vec(I)|
  std::map<int, double> in_normal_higher;  // degree -> |v~_k|
  std::map<int, double> offdiag;           // degree -> |offdiag(w~_k)|
  Vector hsv;
  double hsv_gap_min = std::numeric_limits<double>::infinity();
  Warnings warnings;

  double v_higher_max() const {
    double m = 0;
    for (const auto& [k, v] : in_normal_higher) m = std::max(m, v);
    return m;
  }
  double w_quad_offdiag() const { return offdiag.count(2) ? offdiag.at(2) : 0.0; }
  double w_higher_offdiag_max() const {
    double m = 0;
    for (const auto& [k, v] : offdiag)
      if (k > 2) m = std::max(m, v);
    return m;
  }
  double worst() const {
    return std::max({in_normal_quad, v_higher_max(), w_quad_offdiag(), w_higher_offdiag_max()});
  }
};

inline double min_relative_gap(const Vector& sigma) {
  double gap = std::numeric_limits<double>::infinity();
  if (sigma.size() < 2) return gap;
  const double smax = sigma.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    for (Eigen::Index j = i + 1; j < sigma.size(); ++j)
      gap = std::min(gap, std::abs(sigma[i] - sigma[j]) / smax);
  return gap;
}

inline DiagnosticsReport check_in_od(const EnergyExpansion& ec_t, const EnergyExpansion& eo_t,
                                     Warnings warnings = {}) {
  if (ec_t.n != eo_t.n) throw InvalidArgument("check_in_od: dimension mismatch");
  DiagnosticsReport r;
  r.n = ec_t.n;
  r.d = std::min(ec_t.d, eo_t.d);
  r.warnings = std::move(warnings);
  const auto nn = static_cast<Eigen::Index>(r.n);
  {
    const DuplicationMap map2(r.n, 2);
    const Matrix I = Matrix::Identity(nn, nn);
    r.in_normal_quad =
        map2.combine(ec_t.coeff(2) - Eigen::Map<const Vector>(I.data(), I.size())).norm();
  }
  for (int k = 2; k <= r.d; ++k) {
    const DuplicationMap map(r.n, static_cast<std::size_t>(k));
    if (k > 2) r.in_normal_higher[k] = map.combine(ec_t.coeff(k)).norm();
    r.offdiag[k] = r.n > 1 ? map.combine_off_diagonal(eo_t.coeff(k)).norm() : 0.0;
  }
  r.hsv.resize(nn);
  for (Eigen::Index i = 0; i < nn; ++i) r.hsv[i] = std::sqrt(std::max(0.0, eo_t.coeff(2)[i * nn + i]));
  r.hsv_gap_min = min_relative_gap(r.hsv);
  const auto pairs = repeated_singular_values(r.hsv);
  const bool noted = std::any_of(r.warnings.begin(), r.warnings.end(), [](const std::string& w) {
    return w.find("repeated Hankel singular values") != std::string::npos;
  });
  if (!pairs.empty() && !noted) {
    r.warnings.push_back("repeated Hankel singular values: " + describe_pairs(pairs, r.hsv));
  }
  return r;
}

namespace detail {

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

/// Columns: n, d, v2_err, v3_err..vd_err, w2_offdiag..wd_offdiag, hsv_gap_min, warnings.
inline void write_diagnostics_csv(std::ostream& os, const std::vector<DiagnosticsReport>& reports) {
  int d = 2;
  for (const auto& r : reports) d = std::max(d, r.d);
  os << "n,d,v2_err";
  for (int k = 3; k <= d; ++k) os << ",v" << k << "_err";
  for (int k = 2; k <= d; ++k) os << ",w" << k << "_offdiag";
  os << ",hsv_gap_min,warnings\n";
  for (const auto& r : reports) {
    os << r.n << ',' << r.d << ',' << detail::fmt(r.in_normal_quad);
    for (int k = 3; k <= d; ++k)
      os << ',' << (r.in_normal_higher.count(k) ? detail::fmt(r.in_normal_higher.at(k)) : "");
    for (int k = 2; k <= d; ++k)
      os << ',' << (r.offdiag.count(k) ? detail::fmt(r.offdiag.at(k)) : "");
    std::string joined;
    for (const auto& w : r.warnings) joined += (joined.empty() ? "" : " | ") + w;
    os << ',' << detail::fmt(r.hsv_gap_min) << ',' << detail::csv_quote(joined) << '\n';
  }
}

/// 2-norms over the trailing k - dims modes of a degree-k coefficient; the
/// result is the flattened n^dims grid (leading index most significant).
inline Vector tensor_projection(const Vector& w, std::size_t n, int k, int dims) {
  if (dims != 2 && dims != 3) throw InvalidArgument("tensor_projection: dims must be 2 or 3");
  if (dims > k) throw InvalidArgument("tensor_projection: dims exceeds the tensor order");
  if (static_cast<std::size_t>(w.size()) != checked_pow(n, static_cast<std::size_t>(k))) {
    throw InvalidArgument("tensor_projection: coefficient length must be n^k");
  }
  const auto cells = static_cast<Eigen::Index>(checked_pow(n, static_cast<std::size_t>(dims)));
  const auto fiber = static_cast<Eigen::Index>(checked_pow(n, static_cast<std::size_t>(k - dims)));
  Vector grid(cells);
  for (Eigen::Index g = 0; g < cells; ++g) grid[g] = w.segment(g * fiber, fiber).norm();
  return grid;
}

/// Whitespace-delimited matrix; 3-D grids are written as n slices separated
/// by blank lines (slice = first index).
inline void write_projection(std::ostream& os, const Vector& grid, std::size_t n, int dims) {
  const auto nn = static_cast<Eigen::Index>(n);
  const Eigen::Index slices = dims == 3 ? nn : 1;
  for (Eigen::Index s = 0; s < slices; ++s) {
    if (s > 0) os << '\n';
    for (Eigen::Index i = 0; i < nn; ++i) {
      for (Eigen::Index j = 0; j < nn; ++j)
        os << (j ? " " : "") << detail::fmt(grid[(s * nn + i) * nn + j]);
      os << '\n';
    }
  }
}

struct TimingRow {
  std::size_t n = 0;
  int d = 0;
  double energy_sec = std::numeric_limits<double>::quiet_NaN();
  double transform_sec = std::numeric_limits<double>::quiet_NaN();
  double worst_metric = std::numeric_limits<double>::quiet_NaN();
  std::string note;  // nonempty when skipped
};

struct TimingTable {
  std::vector<TimingRow> rows;
  double energy_slope = std::numeric_limits<double>::quiet_NaN();
  double transform_slope = std::numeric_limits<double>::quiet_NaN();
};

/// Least-squares slope of log(y) against log(x); NaN with fewer than two points.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (x[i] > 0 && y[i] > 0 && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Times energy computation (both expansions) and the balancing
/// transformation for duffing_chain(n / 2); medians over `repeats` runs
/// after one warm-up run.  Model construction is not timed.  Runs that exhaust memory are skipped.
inline TimingTable scaling_benchmark(const std::vector<std::size_t>& n_list, int d,
                                     int repeats = 3, Topology topology = Topology::Anchored,
                                     const BalanceOptions& options = {}) {
  if (repeats < 1) throw InvalidArgument("scaling_benchmark: repeats must be >= 1");
  using clock = std::chrono::steady_clock;
  TimingTable table;
  for (std::size_t n : n_list) {
    TimingRow row;
    row.n = n;
    row.d = d;
    if (n < 2 || n % 2 != 0) {
      row.note = "n must be even and >= 2";
      table.rows.push_back(row);
      continue;
    }
    try {
      const PolynomialDynamics model = duffing_chain(n / 2, topology);
      std::vector<double> te, tt;
      // rep -1 is an untimed warm-up
      for (int rep = -1; rep < repeats; ++rep) {
        auto t0 = clock::now();
        const auto ec = solve_energy_expansion(model, d, EnergyKind::Controllability);
        const auto eo = solve_energy_expansion(model, d, EnergyKind::Observability);
        auto t1 = clock::now();
        const auto res = compute_in_od_transformation(ec, eo, d, options);
        auto t2 = clock::now();
        if (rep < 0) continue;
        te.push_back(std::chrono::duration<double>(t1 - t0).count());
        tt.push_back(std::chrono::duration<double>(t2 - t1).count());
        row.worst_metric = check_in_od(res.ec, res.eo).worst();
      }
      row.energy_sec = median(te);
      row.transform_sec = median(tt);
    } catch (const std::bad_alloc&) {
      row.note = "skipped: out of memory";
    } catch (const CapacityError& e) {
      row.note = std::string("skipped: ") + e.what();
    }
    table.rows.push_back(row);
  }
  std::vector<double> ns, es, ts;
  for (const auto& r : table.rows) {
    if (!r.note.empty()) continue;
    ns.push_back(static_cast<double>(r.n));
    es.push_back(r.energy_sec);
    ts.push_back(r.transform_sec);
  }
  table.energy_slope = loglog_slope(ns, es);
  table.transform_slope = loglog_slope(ns, ts);
  return table;
}

/// Columns: n, d, energy_sec, transform_sec; skipped runs and fitted slopes
/// follow as '#' comment lines.
inline void write_timings_csv(std::ostream& os, const TimingTable& table) {
  os << "n,d,energy_sec,transform_sec\n";
  for (const auto& r : table.rows) {
    if (!r.note.empty()) continue;
    os << r.n << ',' << r.d << ',' << detail::fmt(r.energy_sec) << ','
       << detail::fmt(r.transform_sec) << '\n';
  }
  for (const auto& r : table.rows)
    if (!r.note.empty()) os << "# n=" << r.n << ' ' << r.note << '\n';
  if (std::isfinite(table.energy_slope)) {
    os << "# slope energy_sec " << detail::fmt(table.energy_slope) << '\n';
    os << "# slope transform_sec " << detail::fmt(table.transform_slope) << '\n';
  }
}

}  // namespace kronbal
