#pragma once

#include "cpsm/softmax.hpp"
#include "cpsm/types.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace cpsm {

/// Binary rule: label 1 where the class-1 posterior is strictly above
/// `threshold`, else label 2. For K > 2 the threshold is ignored and the
/// lowest-index argmax is returned.
Labels classify(const PosteriorMatrix &posterior, double threshold);

/// Thresholds at the posterior's own class-1 mean, the balanced-accuracy
/// rule with the prior estimated from the same posteriors.
Labels classify_at_estimated_prior(const PosteriorMatrix &posterior);

/// Mean of per-class recalls over classes 1..n_classes. Throws
/// ValidationError("undefined recall ...") if a class never occurs in
/// y_true.
double balanced_accuracy(const Labels &y_true, const Labels &y_pred,
                         int n_classes = 2);

/// Mean over rows of |method(y=1) - oracle(y=1)|.
double approximation_error(const PosteriorMatrix &method_posterior,
                           const PosteriorMatrix &oracle_posterior);

/// Fits on the target's full features with its (normally hidden) labels and
/// predicts the same rows.
PosteriorMatrix fit_oracle(const LabeledDataset &target_with_labels,
                           const FitConfig &config);

/// One benchmark measurement. `error` marks a failed run; its metrics are
/// NaN.
struct MetricRow {
  std::string method;
  double a = 0.0;
  double k = 0.0;
  int n = 0;
  std::uint64_t seed = 0;
  double balanced_accuracy = 0.0;
  double approx_error = 0.0;
  double wall_clock_seconds = 0.0;
  std::optional<std::string> error;
};

}  // namespace cpsm
