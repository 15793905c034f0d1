#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hms/error.hpp"
#include "hms/ranking.hpp"

namespace hms {

// Correlations weaker than this are ignored per Cohen's effect-size rule.
inline constexpr double effect_gate_min_abs_rho = 0.2;

// Largest sample size for which Spearman p-values use the exact permutation
// distribution; larger samples use the t approximation.
inline constexpr std::size_t exact_p_max_n = 12;

namespace detail {

// Continued fraction for the regularized incomplete beta (Lentz's method).
inline double betacf(double a, double b, double x) {
  constexpr int max_iter = 300;
  constexpr double eps = 3e-16;
  constexpr double fpmin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

// Regularized incomplete beta I_x(a, b).
inline double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

// Two-sided p-value of a t statistic with nu degrees of freedom.
inline double t_two_sided_p(double t, double nu) {
  if (!std::isfinite(t)) return 0.0;
  return ibeta(0.5 * nu, 0.5, nu / (nu + t * t));
}

// Two-sided significance of rho at sample size n via the t approximation
// t = rho * sqrt((n-2) / (1 - rho^2)), n-2 degrees of freedom.
inline double rho_t_pvalue(double rho, std::size_t n) {
  if (n < 3) return 1.0;
  const double nu = static_cast<double>(n - 2);
  const double denom = 1.0 - rho * rho;
  if (denom <= 0.0) return 0.0;
  return t_two_sided_p(rho * std::sqrt(nu / denom), nu);
}

inline unsigned long long factorial_ull(std::size_t n) {
  unsigned long long f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= i;
  return f;
}

// Distribution over all n! pairings of the doubled-rank inner product
// v = sum_i (2 rx_i) * (2 ry_pi(i)). Spearman rho is a strictly increasing
// affine function of v, so tail counts on the integer v lattice give exact
// permutation p-values with no floating-point comparisons.
// Subset DP: positions of x are filled in order; the mask records which
// y-ranks have been used. Layered by popcount to bound memory.
inline std::vector<unsigned long long> doubled_rank_product_distribution(
    const std::vector<long long>& sx, const std::vector<long long>& sy) {
  const int n = static_cast<int>(sx.size());
  std::vector<long long> xs = sx, ys = sy;
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  long long maxv = 0;
  for (int i = 0; i < n; ++i) maxv += xs[i] * ys[i];
  const std::size_t width = static_cast<std::size_t>(maxv) + 1;

  const std::uint32_t full = 1u << n;
  std::vector<std::uint32_t> layer_index(full, 0);
  std::vector<std::vector<std::uint32_t>> layer_masks(n + 1);
  for (std::uint32_t mask = 0; mask < full; ++mask) {
    const int k = std::popcount(mask);
    layer_index[mask] = static_cast<std::uint32_t>(layer_masks[k].size());
    layer_masks[k].push_back(mask);
  }

  std::vector<std::vector<unsigned long long>> cur(1);
  cur[0].assign(width, 0ull);
  cur[0][0] = 1;
  for (int k = 0; k < n; ++k) {
    std::vector<std::vector<unsigned long long>> next(layer_masks[k + 1].size());
    for (auto& row : next) row.assign(width, 0ull);
    for (std::size_t mi = 0; mi < layer_masks[k].size(); ++mi) {
      const std::uint32_t mask = layer_masks[k][mi];
      const auto& src = cur[mi];
      for (int j = 0; j < n; ++j) {
        if (mask & (1u << j)) continue;
        const long long add = sx[k] * sy[j];
        auto& dst = next[layer_index[mask | (1u << j)]];
        for (std::size_t v = 0; v + static_cast<std::size_t>(add) < width; ++v)
          if (src[v]) dst[v + static_cast<std::size_t>(add)] += src[v];
      }
    }
    cur.swap(next);
  }
  return cur[0];
}

inline std::vector<long long> doubled_ranks(std::span<const double> ranks) {
  std::vector<long long> out(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i)
    out[i] = std::llround(2.0 * ranks[i]);
  return out;
}

// Exact two-sided permutation p-value for the observed rank pairing.
inline double exact_permutation_pvalue(std::span<const double> rx,
                                       std::span<const double> ry) {
  const std::size_t n = rx.size();
  const auto sx = doubled_ranks(rx);
  const auto sy = doubled_ranks(ry);
  long long v_obs = 0;
  for (std::size_t i = 0; i < n; ++i) v_obs += sx[i] * sy[i];
  const long long center =
      static_cast<long long>(n) * static_cast<long long>(n + 1) *
      static_cast<long long>(n + 1);
  const long long dist_obs = std::llabs(v_obs - center);
  const auto counts = doubled_rank_product_distribution(sx, sy);
  unsigned long long hits = 0;
  for (std::size_t v = 0; v < counts.size(); ++v)
    if (std::llabs(static_cast<long long>(v) - center) >= dist_obs) hits += counts[v];
  return static_cast<double>(hits) / static_cast<double>(factorial_ull(n));
}

// Exact permutation null of Spearman rho at sample size n (tie-free ranks),
// evaluated at |rho| >= |rho_obs|. Used where only a rho value is available.
inline double exact_null_pvalue(double rho_abs, std::size_t n) {
  std::vector<long long> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = 2 * static_cast<long long>(i + 1);
  const long long center =
      static_cast<long long>(n) * static_cast<long long>(n + 1) *
      static_cast<long long>(n + 1);
  // 4 * sum (r - mean)^2 = n(n^2-1)/3 for tie-free ranks.
  const double scale = static_cast<double>(n) *
                       (static_cast<double>(n) * static_cast<double>(n) - 1.0) / 3.0;
  const double dist_obs = rho_abs * scale;
  const auto counts = doubled_rank_product_distribution(s, s);
  unsigned long long hits = 0;
  for (std::size_t v = 0; v < counts.size(); ++v)
    if (std::fabs(static_cast<double>(static_cast<long long>(v) - center)) >=
        dist_obs - 1e-9)
      hits += counts[v];
  return static_cast<double>(hits) / static_cast<double>(factorial_ull(n));
}

inline void check_not_constant(std::span<const double> s, const char* what) {
  for (double v : s)
    if (v != s.front()) return;
  throw degenerate_series(std::string(what) + ": all values tied");
}

}  // namespace detail

struct spearman_result {
  double rho = 0.0;
  double p = 1.0;
};

// Spearman's rho with a two-sided significance level: exact permutation
// distribution up to exact_p_max_n samples, t approximation beyond.
inline spearman_result spearman_with_p(std::span<const double> x,
                                       std::span<const double> y) {
  if (x.size() != y.size())
    throw length_mismatch("spearman_with_p: series differ in length");
  if (x.size() < 4) throw invalid_input("spearman_with_p: need N >= 4");
  detail::check_not_constant(x, "spearman_with_p: x");
  detail::check_not_constant(y, "spearman_with_p: y");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const double rho = rank_pearson(rx, ry);
  const double p = x.size() <= exact_p_max_n
                       ? detail::exact_permutation_pvalue(rx, ry)
                       : detail::rho_t_pvalue(rho, x.size());
  return {rho, p};
}

// Bonferroni correction over k tests: p -> min(1, k * p), order preserved.
inline std::vector<double> bonferroni(std::span<const double> p_values, std::size_t k) {
  if (k < p_values.size())
    throw invalid_input("bonferroni: k smaller than the number of p-values");
  std::vector<double> out;
  out.reserve(p_values.size());
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw invalid_p("bonferroni: p outside [0,1]");
    out.push_back(std::min(1.0, static_cast<double>(k) * p));
  }
  return out;
}

namespace detail {

// First-order partial correlation from the three pairwise correlations.
inline double partial_from_pairwise(double r_xy, double r_xz, double r_yz) {
  return (r_xy - r_xz * r_yz) /
         std::sqrt((1.0 - r_xz * r_xz) * (1.0 - r_yz * r_yz));
}

}  // namespace detail

// Rank-based partial correlation of x and y controlling for one covariate:
// all three series are rank-transformed, then the pairwise Pearson
// correlations of the ranks are combined. Significance uses N-1 effective
// samples.
inline spearman_result partial_spearman(std::span<const double> x,
                                        std::span<const double> y,
                                        std::span<const double> control) {
  if (x.size() != y.size() || x.size() != control.size())
    throw length_mismatch("partial_spearman: series differ in length");
  if (x.size() < 5) throw invalid_input("partial_spearman: need N >= 5");
  detail::check_not_constant(x, "partial_spearman: x");
  detail::check_not_constant(y, "partial_spearman: y");
  detail::check_not_constant(control, "partial_spearman: control");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const auto rz = midranks(control);
  const double r_xy = rank_pearson(rx, ry);
  const double r_xz = rank_pearson(rx, rz);
  const double r_yz = rank_pearson(ry, rz);
  if (std::fabs(r_xz) >= 1.0 - 1e-12 || std::fabs(r_yz) >= 1.0 - 1e-12)
    throw singular_control("partial_spearman: control collinear with a series");
  const double rho =
      std::clamp(detail::partial_from_pairwise(r_xy, r_xz, r_yz), -1.0, 1.0);
  const std::size_t n_eff = x.size() - 1;
  const double p = n_eff <= exact_p_max_n
                       ? detail::exact_null_pvalue(std::fabs(rho), n_eff)
                       : detail::rho_t_pvalue(rho, n_eff);
  return {rho, p};
}

// Per-model metrics keyed by column name; all columns share the row order
// given by model_ids.
struct metric_table {
  std::vector<std::string> model_ids;
  std::vector<std::string> column_names;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return model_ids.size(); }

  bool has_column(const std::string& name) const {
    return std::find(column_names.begin(), column_names.end(), name) !=
           column_names.end();
  }

  std::span<const double> column(const std::string& name) const {
    for (std::size_t i = 0; i < column_names.size(); ++i)
      if (column_names[i] == name) return columns[i];
    throw unknown_column("metric table: no column named " + name);
  }

  void add_column(const std::string& name, std::vector<double> values) {
    if (has_column(name)) throw invalid_input("metric table: duplicate column " + name);
    if (values.size() != model_ids.size())
      throw length_mismatch("metric table: column " + name + " has wrong length");
    for (double v : values)
      if (!std::isfinite(v))
        throw invalid_input("metric table: non-finite value in column " + name);
    column_names.push_back(name);
    columns.push_back(std::move(values));
  }
};

struct correlation_pair {
  std::string column_a;
  std::string column_b;
  double rho = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  bool passes_effect_gate = false;
};

struct correlation_report {
  std::vector<std::string> columns;
  std::size_t bonferroni_k = 0;
  std::vector<correlation_pair> pairs;
};

// All unordered column pairs, Bonferroni-corrected over the number of pairs,
// with the |rho| >= 0.2 effect-size gate flagged per pair.
inline correlation_report correlation_matrix(const metric_table& t,
                                             std::span<const std::string> names) {
  if (names.size() < 2)
    throw invalid_input("correlation_matrix: need at least 2 columns");
  for (const auto& name : names)
    if (!t.has_column(name))
      throw unknown_column("correlation_matrix: no column named " + name);

  correlation_report report;
  report.columns.assign(names.begin(), names.end());
  std::vector<double> raw;
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = i + 1; j < names.size(); ++j) {
      const auto res = spearman_with_p(t.column(names[i]), t.column(names[j]));
      correlation_pair pair;
      pair.column_a = names[i];
      pair.column_b = names[j];
      pair.rho = res.rho;
      pair.p_raw = res.p;
      pair.passes_effect_gate = std::fabs(res.rho) >= effect_gate_min_abs_rho;
      report.pairs.push_back(std::move(pair));
      raw.push_back(res.p);
    }
  }
  report.bonferroni_k = report.pairs.size();
  const auto adjusted = bonferroni(raw, report.bonferroni_k);
  for (std::size_t i = 0; i < adjusted.size(); ++i)
    report.pairs[i].p_adjusted = adjusted[i];
  return report;
}

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation, N-1 denominator; 0 for a single observation.
inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct summary_stats {
  double mean = 0.0;
  double sd = 0.0;
};

struct column_summary {
  std::string column;
  summary_stats full;
  summary_stats top;
  summary_stats bottom;
};

struct table_summary {
  std::string rank_by;
  std::size_t top_k = 0;
  std::vector<std::string> top_ids;
  std::vector<std::string> bottom_ids;
  std::vector<column_summary> columns;
};

// Mean and SD per column over the full table, the top_k rows by the ranking
// column (descending) and the bottom_k rows (ascending).
inline table_summary summarize(const metric_table& t, const std::string& rank_by,
                               std::size_t top_k) {
  const auto rank_col = t.column(rank_by);
  if (top_k < 1 || top_k > t.rows())
    throw invalid_input("summarize: top_k must be in [1, N]");

  std::vector<std::size_t> order(t.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rank_col[a] > rank_col[b];
  });

  table_summary summary;
  summary.rank_by = rank_by;
  summary.top_k = top_k;
  for (std::size_t i = 0; i < top_k; ++i) {
    summary.top_ids.push_back(t.model_ids[order[i]]);
    summary.bottom_ids.push_back(t.model_ids[order[t.rows() - 1 - i]]);
  }

  const auto subset_stats = [&](std::span<const double> col,
                                bool from_top) -> summary_stats {
    std::vector<double> vals;
    vals.reserve(top_k);
    for (std::size_t i = 0; i < top_k; ++i) {
      const std::size_t idx = from_top ? order[i] : order[t.rows() - 1 - i];
      vals.push_back(col[idx]);
    }
    return {mean_of(vals), sample_sd(vals)};
  };

  for (std::size_t c = 0; c < t.column_names.size(); ++c) {
    column_summary cs;
    cs.column = t.column_names[c];
    cs.full = {mean_of(t.columns[c]), sample_sd(t.columns[c])};
    cs.top = subset_stats(t.columns[c], true);
    cs.bottom = subset_stats(t.columns[c], false);
    summary.columns.push_back(std::move(cs));
  }
  return summary;
}

}  // namespace hms
