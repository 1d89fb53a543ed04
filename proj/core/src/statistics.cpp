#include "vivecap/statistics.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace vivecap::stats {
namespace {

using Kind = StatsError::Kind;

// Modified Lentz evaluation of the continued fraction for I_x(a, b); y = 1 - x
// is passed separately so neither tail loses digits to cancellation.
double beta_continued_fraction(double x, double y, double a, double b) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  constexpr int kMaxIter = 10000;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  const double log_front =
      a * std::log(x) + b * std::log(y) - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
  return std::exp(log_front) * h / a;
}

double incomplete_beta(double x, double y, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  if (x < (a + 1.0) / (a + b + 2.0)) return beta_continued_fraction(x, y, a, b);
  return 1.0 - beta_continued_fraction(y, x, b, a);
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0)) throw StatsError(Kind::Domain, fmt::format("incomplete beta: x={} outside [0, 1]", x));
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw StatsError(Kind::Domain, fmt::format("incomplete beta: a={} and b={} must be positive", a, b));
  return incomplete_beta(x, 1.0 - x, a, b);
}

double student_t_sf(double t, int df) {
  if (df < 1) throw StatsError(Kind::Domain, fmt::format("student t: df={} must be at least 1", df));
  if (std::isnan(t)) throw StatsError(Kind::Domain, "student t: t is NaN");
  if (t < 0.0) return 1.0 - student_t_sf(-t, df);
  if (std::isinf(t)) return 0.0;
  const double nu = df;
  const double t2 = t * t;
  // x = nu/(nu+t^2) and 1-x = t^2/(nu+t^2), each formed directly.
  const double x = nu / (nu + t2);
  const double y = t2 / (nu + t2);
  return 0.5 * incomplete_beta(x, y, nu / 2.0, 0.5);
}

TTestResult paired_t_test(const PairedSamples& s) {
  if (s.before.size() != s.after.size())
    throw StatsError(Kind::LengthMismatch, fmt::format("{}: {} before values vs {} after values", s.label,
                                                       s.before.size(), s.after.size()));
  const std::size_t n = s.before.size();
  if (n < 2) throw StatsError(Kind::TooFewSamples, fmt::format("{}: a paired t-test needs at least 2 pairs", s.label));
  std::vector<double> d(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = s.after[i] - s.before[i];
    sum += d[i];
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) throw StatsError(Kind::ZeroVariance, fmt::format("{}: every difference is identical", s.label));

  TTestResult r;
  r.n = static_cast<int>(n);
  r.degrees_of_freedom = r.n - 1;
  r.mean_difference = mean;
  r.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p_value_one_sided = student_t_sf(r.t_statistic, r.degrees_of_freedom);
  return r;
}

double bonferroni_threshold(const CorrectionPolicy& p) {
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw StatsError(Kind::Domain, fmt::format("alpha={} outside (0, 1)", p.alpha));
  if (p.m_tests < 1) throw StatsError(Kind::Domain, fmt::format("m_tests={} must be positive", p.m_tests));
  return p.alpha / p.m_tests;
}

std::vector<SignificanceRow> significance_report(const std::vector<std::pair<std::string, TTestResult>>& results,
                                                 const CorrectionPolicy& policy) {
  if (static_cast<std::size_t>(policy.m_tests) != results.size())
    throw StatsError(Kind::CountMismatch,
                     fmt::format("correction assumes {} tests but {} were given", policy.m_tests, results.size()));
  const double threshold = bonferroni_threshold(policy);
  std::vector<SignificanceRow> rows;
  for (const auto& [metric, r] : results)
    rows.push_back({metric, r, threshold, r.p_value_one_sided < threshold});
  return rows;
}

std::string significance_to_csv(const std::vector<SignificanceRow>& rows) {
  std::string out = "metric,t,df,p_one_sided,threshold,significant\n";
  for (const auto& r : rows)
    out += fmt::format("{},{:.4f},{},{:.3e},{},{}\n", r.metric, r.result.t_statistic, r.result.degrees_of_freedom,
                       r.result.p_value_one_sided, fmt_double(r.threshold), r.significant ? "true" : "false");
  return out;
}

std::string significance_to_json(const std::vector<SignificanceRow>& rows, const CorrectionPolicy& policy) {
  nlohmann::ordered_json j;
  j["alpha"] = policy.alpha;
  j["m_tests"] = policy.m_tests;
  j["threshold"] = bonferroni_threshold(policy);
  auto& out = j["tests"] = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    out.push_back({{"metric", r.metric},
                   {"t", r.result.t_statistic},
                   {"df", r.result.degrees_of_freedom},
                   {"p_one_sided", r.result.p_value_one_sided},
                   {"threshold", r.threshold},
                   {"significant", r.significant},
                   {"n", r.result.n},
                   {"mean_difference", r.result.mean_difference}});
  return j.dump(2) + "\n";
}

}  // namespace vivecap::stats
