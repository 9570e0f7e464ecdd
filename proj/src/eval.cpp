#include "cpsm/eval.hpp"

#include "cpsm/error.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace cpsm {

Labels classify(const PosteriorMatrix &posterior, double threshold) {
  if (posterior.n_classes() < 2) throw ValidationError("posterior needs >= 2 classes");
  if (posterior.n_classes() > 2) return argmax_labels(posterior);
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("threshold must lie in (0, 1)");
  }
  Labels out(posterior.rows());
  for (Eigen::Index i = 0; i < posterior.rows(); ++i) {
    out(i) = posterior.probs(i, 0) > threshold ? 1 : 2;
  }
  return out;
}

Labels classify_at_estimated_prior(const PosteriorMatrix &posterior) {
  if (posterior.n_classes() != 2) {
    throw ValidationError("prior-threshold rule needs a binary posterior");
  }
  return classify(posterior, column_mean(posterior.probs)(0));
}

double balanced_accuracy(const Labels &y_true, const Labels &y_pred, int n_classes) {
  if (y_true.size() != y_pred.size()) {
    throw ValidationError("y_true and y_pred lengths differ");
  }
  std::vector<double> hits(n_classes, 0.0);
  std::vector<double> totals(n_classes, 0.0);
  for (Eigen::Index i = 0; i < y_true.size(); ++i) {
    const int t = y_true(i);
    if (t < 1 || t > n_classes || y_pred(i) < 1 || y_pred(i) > n_classes) {
      throw ValidationError("label outside {1.." + std::to_string(n_classes) +
                            "} at row " + std::to_string(i));
    }
    totals[t - 1] += 1.0;
    if (y_pred(i) == t) hits[t - 1] += 1.0;
  }
  double sum = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    if (totals[c] == 0.0) {
      throw ValidationError("undefined recall: class " + std::to_string(c + 1) +
                            " absent from y_true");
    }
    sum += hits[c] / totals[c];
  }
  return sum / n_classes;
}

double approximation_error(const PosteriorMatrix &method_posterior,
                           const PosteriorMatrix &oracle_posterior) {
  if (method_posterior.rows() != oracle_posterior.rows() ||
      method_posterior.n_classes() != oracle_posterior.n_classes()) {
    throw ValidationError("posterior shapes differ");
  }
  if (method_posterior.rows() == 0) throw ValidationError("empty posterior");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < method_posterior.rows(); ++i) {
    sum += std::abs(method_posterior.probs(i, 0) - oracle_posterior.probs(i, 0));
  }
  return sum / static_cast<double>(method_posterior.rows());
}

PosteriorMatrix fit_oracle(const LabeledDataset &target_with_labels,
                           const FitConfig &config) {
  const SoftmaxParams params =
      fit_hard(target_with_labels, FeatureBlock::Full, config);
  return predict_proba(params, features(target_with_labels, FeatureBlock::Full));
}

}  // namespace cpsm
