#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace aga {

double accuracy(std::span<const int> preds, std::span<const int> labels);

// Unweighted mean of per-class F1 over classes 0..c-1. A class with no
// predicted and no actual members scores 0.
double macro_f1(std::span<const int> preds, std::span<const int> labels, std::size_t classes);

// counts[actual][predicted]
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> preds, std::span<const int> labels,
                                                       std::size_t classes);

struct TTestResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;  // two-sided
};

// Unequal-variance two-sample test with Welch-Satterthwaite degrees of freedom.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);
// Paired test on a[i] - b[i].
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);
// Two-sided tail probability P(|T| >= |t|) of Student's t with `dof` degrees.
double student_t_two_sided_p(double t, double dof);

double mean(std::span<const double> xs);
// Sample (n - 1) standard deviation; 0 for fewer than two values.
double sample_stddev(std::span<const double> xs);

}  // namespace aga
