#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "carerl/domain.hpp"

namespace carerl {

namespace detail {

inline constexpr double kPi = 3.14159265358979323846;

inline double gammln(double x) {
  static const double cof[14] = {
      57.1562356658629235,     -59.5979603554754912,    14.1360979747417471,
      -0.491913816097620199,   0.339946499848118887e-4, 0.465236289270485756e-4,
      -0.983744753048795646e-4, 0.158088703224912494e-3, -0.210264441724104883e-3,
      0.217439618115212643e-3, -0.164318106536763890e-3, 0.844182239838527433e-4,
      -0.261908384015814087e-4, 0.368991826595316234e-5};
  double y = x, tmp = x + 5.24218750000000000;
  tmp = (x + 0.5) * std::log(tmp) - tmp;
  double ser = 0.999999999999997092;
  for (double c : cof) ser += c / ++y;
  return tmp + std::log(2.5066282746310005 * ser / x);
}

inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14, kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) <= kEps) return h;
  }
  throw NoConvergence("betacf: continued fraction did not converge");
}

}  // namespace detail

// Regularized incomplete beta function I_x(a, b).
inline double ibeta(double a, double b, double x) {
  if (a <= 0 || b <= 0) throw std::invalid_argument("ibeta: a and b must be positive");
  if (x < 0 || x > 1) throw std::invalid_argument("ibeta: x outside [0, 1]");
  if (x == 0 || x == 1) return x;
  const double front = std::exp(detail::gammln(a + b) - detail::gammln(a) -
                                detail::gammln(b) + a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::betacf(a, b, x) / a;
  return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Two-sided p-value for a Student t statistic.
inline double student_t_two_sided_p(double t, double df) {
  if (df <= 0) throw std::invalid_argument("student_t_two_sided_p: df must be positive");
  return ibeta(df / 2.0, 0.5, df / (df + t * t));
}

// Right tail of the F distribution.
inline double f_upper_p(double f, double df1, double df2) {
  if (df1 <= 0 || df2 <= 0) throw std::invalid_argument("f_upper_p: df must be positive");
  if (f <= 0) return 1.0;
  return ibeta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f));
}

// ---------------------------------------------------------------------------
// One-way analysis of variance.

struct GroupStat {
  std::size_t n = 0;
  double mean = 0;
};

struct AnovaResult {
  double f = 0;
  double p = 1;
  double ss_between = 0;
  double ss_within = 0;
  double ms_between = 0;
  double ms_within = 0;
  std::uint64_t df_between = 0;
  std::uint64_t df_within = 0;
  double grand_mean = 0;
  std::vector<GroupStat> groups;
};

inline AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw DegenerateInput("one_way_anova: need at least 2 groups");
  AnovaResult r;
  std::size_t total_n = 0;
  double total_sum = 0;
  for (const auto& g : groups) {
    if (g.size() < 2)
      throw DegenerateInput("one_way_anova: every group needs at least 2 values");
    double sum = 0;
    for (double v : g) sum += v;
    r.groups.push_back({g.size(), sum / static_cast<double>(g.size())});
    total_n += g.size();
    total_sum += sum;
  }
  r.grand_mean = total_sum / static_cast<double>(total_n);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double d = r.groups[i].mean - r.grand_mean;
    r.ss_between += static_cast<double>(r.groups[i].n) * d * d;
    for (double v : groups[i]) {
      const double e = v - r.groups[i].mean;
      r.ss_within += e * e;
    }
  }
  r.df_between = groups.size() - 1;
  r.df_within = total_n - groups.size();
  r.ms_between = r.ss_between / static_cast<double>(r.df_between);
  // no within-group variance at all: F would be x/0; refuse rather than
  // adopt a convention
  if (r.ss_within <= 0) throw DegenerateInput("one_way_anova: zero within-group variance");
  r.ms_within = r.ss_within / static_cast<double>(r.df_within);
  r.f = r.ms_between / r.ms_within;
  r.p = f_upper_p(r.f, static_cast<double>(r.df_between), static_cast<double>(r.df_within));
  return r;
}

// ---------------------------------------------------------------------------
// Studentized range distribution, computed by direct quadrature of
//   P(Q <= q) = E_s[ k * Int phi(z) (Phi(z) - Phi(z - q s))^(k-1) dz ]
// where s is the square root of a chi-squared over its df. Above 10000 df the
// outer expectation is skipped (s == 1), which is accurate to about 1e-4.

namespace detail {

struct Quadrature {
  std::vector<double> x, w;  // nodes and weights on [-1, 1]
};

inline const Quadrature& gauss_legendre_64() {
  static const Quadrature q = [] {
    constexpr int n = 64;
    Quadrature out;
    out.x.resize(n);
    out.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
      double pp = 0;
      for (int it = 0; it < 100; ++it) {
        double p1 = 1.0, p2 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p3 = p2;
          p2 = p1;
          p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
        }
        pp = n * (z * p1 - p2) / (z * z - 1.0);
        const double z1 = z;
        z = z1 - p1 / pp;
        if (std::abs(z - z1) < 1e-15) break;
      }
      out.x[i] = -z;
      out.x[n - 1 - i] = z;
      out.w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
      out.w[n - 1 - i] = out.w[i];
    }
    return out;
  }();
  return q;
}

// P(range of k standard normals <= r)
inline double prange(double r, int k) {
  if (r <= 0) return 0;
  const auto& gl = gauss_legendre_64();
  constexpr double lo = -8.0, hi = 8.0;
  const double mid = 0.5 * (hi + lo), half = 0.5 * (hi - lo);
  double sum = 0;
  for (std::size_t i = 0; i < gl.x.size(); ++i) {
    const double z = mid + half * gl.x[i];
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
    const double inner = normal_cdf(z) - normal_cdf(z - r);
    sum += gl.w[i] * phi * std::pow(inner, k - 1);
  }
  return std::clamp(k * half * sum, 0.0, 1.0);
}

}  // namespace detail

inline double ptukey(double q, int k, double df) {
  if (k < 2) throw std::invalid_argument("ptukey: need at least 2 groups");
  if (df <= 0) throw std::invalid_argument("ptukey: df must be positive");
  if (q <= 0) return 0;
  if (df > 10000) return detail::prange(q, k);

  // density of s = sqrt(chi2_df / df):
  //   f(s) = 2 (df/2)^(df/2) / Gamma(df/2) * s^(df-1) * exp(-df s^2 / 2)
  const double half_df = df / 2.0;
  const double log_norm =
      std::log(2.0) + half_df * std::log(half_df) - detail::gammln(half_df);
  const double sd = 1.0 / std::sqrt(2.0 * df);
  const double lo = std::max(0.0, 1.0 - 10.0 * sd);
  const double hi = 1.0 + 10.0 * sd;
  const auto& gl = detail::gauss_legendre_64();
  const double mid = 0.5 * (hi + lo), half = 0.5 * (hi - lo);
  double sum = 0;
  for (std::size_t i = 0; i < gl.x.size(); ++i) {
    const double s = mid + half * gl.x[i];
    if (s <= 0) continue;
    const double log_density = log_norm + (df - 1.0) * std::log(s) - half_df * s * s;
    sum += gl.w[i] * std::exp(log_density) * detail::prange(q * s, k);
  }
  return std::clamp(half * sum, 0.0, 1.0);
}

// Smallest q with ptukey(q, k, df) >= p, by bisection.
inline double qtukey(double p, int k, double df) {
  if (p <= 0 || p >= 1) throw std::invalid_argument("qtukey: p outside (0, 1)");
  double lo = 0, hi = 1;
  while (ptukey(hi, k, df) < p) {
    hi *= 2;
    if (hi > 1e6) throw NoConvergence("qtukey: no bracket");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (ptukey(mid, k, df) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-10) break;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Tukey HSD on unequal group sizes (the Tukey-Kramer form).

struct PairwiseComparison {
  std::size_t i = 0, j = 0;
  double diff = 0;   // mean_j - mean_i
  double se = 0;
  double q = 0;
  double p_adj = 1;
  bool reject = false;  // p_adj < alpha
};

struct TukeyResult {
  std::vector<PairwiseComparison> pairs;
  double ms_within = 0;
  std::uint64_t df_within = 0;
  int k = 0;
  double alpha = 0.05;
};

inline TukeyResult tukey_hsd(const std::vector<std::vector<double>>& groups,
                             double alpha = 0.05) {
  if (alpha <= 0 || alpha >= 1) throw std::invalid_argument("tukey_hsd: alpha outside (0, 1)");
  const AnovaResult a = one_way_anova(groups);
  if (a.ms_within <= 0)
    throw DegenerateInput("tukey_hsd: zero within-group variance");
  TukeyResult r;
  r.ms_within = a.ms_within;
  r.df_within = a.df_within;
  r.k = static_cast<int>(groups.size());
  r.alpha = alpha;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      PairwiseComparison c;
      c.i = i;
      c.j = j;
      c.diff = a.groups[j].mean - a.groups[i].mean;
      c.se = std::sqrt(a.ms_within / 2.0 * (1.0 / static_cast<double>(a.groups[i].n) +
                                            1.0 / static_cast<double>(a.groups[j].n)));
      c.q = std::abs(c.diff) / c.se;
      c.p_adj = std::clamp(1.0 - ptukey(c.q, r.k, static_cast<double>(r.df_within)), 0.0, 1.0);
      c.reject = c.p_adj < alpha;
      r.pairs.push_back(c);
    }
  }
  return r;
}

}  // namespace carerl
