#include "aga/metrics.hpp"

#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "aga/errors.hpp"

namespace aga {

namespace {

void check_pair(std::span<const int> preds, std::span<const int> labels) {
  if (preds.empty()) throw ContractError("metrics need at least one prediction");
  if (preds.size() != labels.size()) {
    throw ContractError("prediction count " + std::to_string(preds.size()) + " != label count " +
                        std::to_string(labels.size()));
  }
}

double variance(std::span<const double> xs) {
  const double mu = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return acc / static_cast<double>(xs.size() - 1);
}

}  // namespace

double accuracy(std::span<const int> preds, std::span<const int> labels) {
  check_pair(preds, labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> preds, std::span<const int> labels,
                                                       std::size_t classes) {
  check_pair(preds, labels);
  std::vector<std::vector<std::size_t>> counts(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || labels[i] < 0 || static_cast<std::size_t>(preds[i]) >= classes ||
        static_cast<std::size_t>(labels[i]) >= classes) {
      throw IndexError("class index outside [0, " + std::to_string(classes) + ")");
    }
    ++counts[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
  }
  return counts;
}

double macro_f1(std::span<const int> preds, std::span<const int> labels, std::size_t classes) {
  const auto counts = confusion_matrix(preds, labels, classes);
  double total = 0.0;
  for (std::size_t k = 0; k < classes; ++k) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      predicted += counts[j][k];
      actual += counts[k][j];
    }
    const std::size_t tp = counts[k][k];
    const std::size_t denom = predicted + actual;  // 2tp + fp + fn
    total += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return total / static_cast<double>(classes);
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_stddev(std::span<const double> xs) {
  return xs.size() < 2 ? 0.0 : std::sqrt(variance(xs));
}

double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw ContractError("t distribution needs positive degrees of freedom");
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t_distribution<double> dist(dof);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ContractError("t-test needs at least two values per sample");
  const double va = variance(a) / static_cast<double>(a.size());
  const double vb = variance(b) / static_cast<double>(b.size());
  if (va + vb == 0.0) throw ContractError("t-test undefined: both samples have zero variance");
  TTestResult r;
  r.t = (mean(a) - mean(b)) / std::sqrt(va + vb);
  r.dof = (va + vb) * (va + vb) /
          (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  r.p = student_t_two_sided_p(r.t, r.dof);
  return r;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("paired t-test needs equally sized samples");
  if (a.size() < 2) throw ContractError("t-test needs at least two values per sample");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const double se = std::sqrt(variance(diff) / static_cast<double>(diff.size()));
  if (se == 0.0) throw ContractError("t-test undefined: differences have zero variance");
  TTestResult r;
  r.t = mean(diff) / se;
  r.dof = static_cast<double>(diff.size() - 1);
  r.p = student_t_two_sided_p(r.t, r.dof);
  return r;
}

}  // namespace aga
