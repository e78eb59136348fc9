#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the library's numeric code paths.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

using big = boost::multiprecision::cpp_bin_float_50;

struct Entry {
  std::string person;
  double y = 0.0;
  double p = 0.0;
};

inline big correlation(const std::vector<big>& a, const std::vector<big>& b) {
  const std::size_t n = a.size();
  big ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  big sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / (sqrt(saa) * sqrt(sbb));
}

inline double pearson(const std::vector<std::pair<double, double>>& pairs) {
  std::vector<big> a, b;
  for (auto [y, p] : pairs) {
    a.emplace_back(y);
    b.emplace_back(p);
  }
  return static_cast<double>(correlation(a, b));
}

// Table-3 summations, written out literally. f is applied per entry for the
// flattened and within scopes and to (mean y, mean yhat) for between.
// kind: 0 = MAE, 1 = SMAPE (eps = 0), 2 = Pearson r.
struct ScopedResult {
  bool defined = true;
  double value = 0.0;
  std::size_t excluded = 0;
};

inline big elementwise(int kind, big y, big p) {
  using boost::multiprecision::abs;
  if (kind == 0) return abs(p - y);
  return 2 * abs(p - y) / (abs(y) + abs(p));
}

inline bool all_equal(const std::vector<big>& xs) {
  return std::all_of(xs.begin(), xs.end(), [&](const big& x) { return x == xs.front(); });
}

inline ScopedResult flattened(int kind, const std::vector<Entry>& entries) {
  std::vector<big> ys, ps;
  for (const auto& e : entries) {
    ys.emplace_back(e.y);
    ps.emplace_back(e.p);
  }
  if (kind == 2) {
    if (ys.size() < 2 || all_equal(ys) || all_equal(ps)) return {false, 0.0, 0};
    return {true, static_cast<double>(correlation(ys, ps)), 0};
  }
  big total = 0;
  for (std::size_t j = 0; j < ys.size(); ++j) total += elementwise(kind, ys[j], ps[j]);
  return {true, static_cast<double>(total / ys.size()), 0};
}

inline std::map<std::string, std::vector<Entry>> groups(const std::vector<Entry>& entries) {
  std::map<std::string, std::vector<Entry>> g;
  for (const auto& e : entries) g[e.person].push_back(e);
  return g;
}

inline ScopedResult between(int kind, const std::vector<Entry>& entries) {
  std::vector<big> ybar, pbar;
  for (const auto& [_, es] : groups(entries)) {
    big sy = 0, sp = 0;
    for (const auto& e : es) {
      sy += e.y;
      sp += e.p;
    }
    ybar.push_back(sy / es.size());
    pbar.push_back(sp / es.size());
  }
  if (kind == 2) {
    if (ybar.size() < 2 || all_equal(ybar) || all_equal(pbar)) return {false, 0.0, 0};
    return {true, static_cast<double>(correlation(ybar, pbar)), 0};
  }
  big total = 0;
  for (std::size_t i = 0; i < ybar.size(); ++i) total += elementwise(kind, ybar[i], pbar[i]);
  return {true, static_cast<double>(total / ybar.size()), 0};
}

inline ScopedResult within(int kind, const std::vector<Entry>& entries) {
  big total = 0;
  std::size_t included = 0, excluded = 0;
  for (const auto& [_, es] : groups(entries)) {
    const auto r = flattened(kind, es);
    if (!r.defined) {
      ++excluded;
      continue;
    }
    // Recompute the per-person value at full precision.
    std::vector<big> ys, ps;
    for (const auto& e : es) {
      ys.emplace_back(e.y);
      ps.emplace_back(e.p);
    }
    if (kind == 2) {
      total += correlation(ys, ps);
    } else {
      big s = 0;
      for (std::size_t j = 0; j < ys.size(); ++j) s += elementwise(kind, ys[j], ps[j]);
      total += s / ys.size();
    }
    ++included;
  }
  if (included == 0) return {false, 0.0, excluded};
  return {true, static_cast<double>(total / included), excluded};
}

// One-sided paired t-test, p = P(T_{n-1} <= t), via Boost.Math at 50 digits.
inline std::pair<double, double> paired_t(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  std::vector<big> d;
  big mean = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d.push_back(big(a[i]) - big(b[i]));
    mean += d.back();
  }
  mean /= n;
  big ss = 0;
  for (const auto& x : d) ss += (x - mean) * (x - mean);
  const big se = sqrt(ss / (n - 1)) / sqrt(big(n));
  const big t = mean / se;
  boost::math::students_t_distribution<big> dist(static_cast<double>(n - 1));
  return {static_cast<double>(t), static_cast<double>(boost::math::cdf(dist, t))};
}

// Gauss-Jordan inverse at 50 digits, partial pivoting.
inline std::vector<std::vector<big>> invert(std::vector<std::vector<big>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<big>> inv(n, std::vector<big>(n, big(0)));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (abs(a[r][col]) > abs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    std::swap(inv[col], inv[piv]);
    const big diag = a[col][col];
    for (std::size_t k = 0; k < n; ++k) {
      a[col][k] /= diag;
      inv[col][k] /= diag;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const big factor = a[r][col];
      if (factor == 0) continue;
      for (std::size_t k = 0; k < n; ++k) {
        a[r][k] -= factor * a[col][k];
        inv[r][k] -= factor * inv[col][k];
      }
    }
  }
  return inv;
}

struct RidgeSolution {
  std::vector<double> weights;
  double bias = 0.0;
};

// Explicit inverse of the centered normal equations at 50 digits.
inline RidgeSolution ridge(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                           double lambda) {
  const std::size_t n = X.size(), p = X.front().size();
  std::vector<big> xm(p, big(0));
  big ym = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ym += y[i];
    for (std::size_t k = 0; k < p; ++k) xm[k] += X[i][k];
  }
  ym /= n;
  for (auto& v : xm) v /= n;
  std::vector<std::vector<big>> A(p, std::vector<big>(p, big(0)));
  std::vector<big> rhs(p, big(0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < p; ++a) {
      const big xa = big(X[i][a]) - xm[a];
      rhs[a] += xa * (big(y[i]) - ym);
      for (std::size_t b = 0; b < p; ++b) A[a][b] += xa * (big(X[i][b]) - xm[b]);
    }
  }
  for (std::size_t a = 0; a < p; ++a) A[a][a] += lambda;
  const auto inv = invert(A);
  RidgeSolution out;
  big bias = ym;
  for (std::size_t a = 0; a < p; ++a) {
    big w = 0;
    for (std::size_t b = 0; b < p; ++b) w += inv[a][b] * rhs[b];
    out.weights.push_back(static_cast<double>(w));
    bias -= xm[a] * w;
  }
  out.bias = static_cast<double>(bias);
  return out;
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix at 50 digits.
// Returns eigenvalues descending and matching eigenvectors (as rows).
inline std::pair<std::vector<double>, std::vector<std::vector<double>>> symmetric_eigen(
    const std::vector<std::vector<double>>& m) {
  const std::size_t n = m.size();
  std::vector<std::vector<big>> a(n, std::vector<big>(n)), v(n, std::vector<big>(n, big(0)));
  for (std::size_t i = 0; i < n; ++i) {
    v[i][i] = 1;
    for (std::size_t j = 0; j < n; ++j) a[i][j] = m[i][j];
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    big off = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < big("1e-90")) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0) continue;
        const big theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const big t = (theta >= 0 ? big(1) : big(-1)) / (abs(theta) + sqrt(theta * theta + 1));
        const big c = 1 / sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const big akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const big apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const big vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a[x][x] > a[y][y]; });
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
  for (auto idx : order) {
    values.push_back(static_cast<double>(a[idx][idx]));
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = static_cast<double>(v[k][idx]);
    vectors.push_back(std::move(col));
  }
  return {values, vectors};
}

}  // namespace oracle
