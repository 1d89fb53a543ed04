#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vivecap/error.hpp"

namespace vivecap::stats {

class StatsError : public Error {
 public:
  enum class Kind { Domain, LengthMismatch, TooFewSamples, ZeroVariance, CountMismatch };
  StatsError(Kind kind, const std::string& detail) : Error(detail), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// I_x(a, b), the regularized incomplete beta function, by Lentz's continued
/// fraction. Throws StatsError(Domain) unless 0 <= x <= 1, a > 0, b > 0.
double regularized_incomplete_beta(double x, double a, double b);

/// P(T > t) for Student's t with `df` degrees of freedom (df >= 1).
double student_t_sf(double t, int df);

struct PairedSamples {
  std::vector<double> before;
  std::vector<double> after;
  std::string label;
};

struct TTestResult {
  double t_statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value_one_sided = 1.0;  // right tail: H1 is after > before
  double mean_difference = 0.0;
  int n = 0;
};

/// Right-tailed paired t-test on d = after - before using the (n-1) sample
/// standard deviation.
TTestResult paired_t_test(const PairedSamples& s);

struct CorrectionPolicy {
  double alpha = 0.05;
  int m_tests = 1;
};

double bonferroni_threshold(const CorrectionPolicy& p);

struct SignificanceRow {
  std::string metric;
  TTestResult result;
  double threshold = 0.0;
  bool significant = false;  // p < threshold, strictly
};

/// Rows in input order. Throws StatsError(CountMismatch) unless
/// policy.m_tests == results.size().
std::vector<SignificanceRow> significance_report(const std::vector<std::pair<std::string, TTestResult>>& results,
                                                 const CorrectionPolicy& policy);

/// Columns: metric, t, df, p_one_sided, threshold, significant (plus n and
/// mean_difference in the JSON form).
std::string significance_to_csv(const std::vector<SignificanceRow>& rows);
std::string significance_to_json(const std::vector<SignificanceRow>& rows, const CorrectionPolicy& policy);

}  // namespace vivecap::stats
