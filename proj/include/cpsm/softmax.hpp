#pragma once

#include "cpsm/types.hpp"

#include <cstdint>
#include <vector>

namespace cpsm {

/// Multinomial logistic model with class K as the reference class:
///
///   P(y = k | f) = exp(b_k + f^T w_k) / (1 + sum_{l<K} exp(b_l + f^T w_l))
///
/// for k < K, and the remaining mass on class K. `intercepts` holds b_k and
/// row k - 1 of `slopes` holds w_k.
struct SoftmaxParams {
  int n_classes = 2;
  Vector intercepts;  // K - 1
  Matrix slopes;      // (K - 1) x d

  int n_features() const { return static_cast<int>(slopes.cols()); }

  static SoftmaxParams zeros(int n_classes, int n_features);

  /// Reduces an over-parameterised model with an explicit row for every
  /// class (K intercepts, K x d slopes) to reference form by subtracting
  /// the K-th row.
  static SoftmaxParams from_full(const Vector &intercepts, const Matrix &slopes);

  /// Intercept-only model reproducing the given class distribution.
  static SoftmaxParams from_prior(const Vector &prior);

  void validate() const;
};

bool operator==(const SoftmaxParams &a, const SoftmaxParams &b);

/// Largest absolute coordinate difference; both models must share shape.
double max_abs_diff(const SoftmaxParams &a, const SoftmaxParams &b);

struct FitConfig {
  int max_iters = 2000;
  /// Kept for configuration compatibility; the line search always tries the
  /// full Newton step first.
  double step_size = 0.1;
  /// Stop once the largest proposed coordinate update is below this.
  double tolerance = 1e-7;
  /// Ridge penalty 0.5 * l2 * ||slopes||^2; intercepts are not penalised.
  double l2_penalty = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;
};

/// n x K class scores with the reference column fixed at zero.
Matrix class_scores(const SoftmaxParams &params, const Matrix &features);

PosteriorMatrix predict_proba(const SoftmaxParams &params,
                              const Matrix &features);

/// Weighted soft-target log-likelihood
///   sum_n w_n [ sum_k t_nk s_nk - log sum_k exp(s_nk) ]
/// with unit weights when `weights` is empty. No penalty term.
double log_likelihood(const SoftmaxParams &params, const Matrix &features,
                      const SoftTargets &targets, const Vector &weights = {});

/// Analytic gradient of log_likelihood, laid out like the parameters.
SoftmaxParams log_likelihood_gradient(const SoftmaxParams &params,
                                      const Matrix &features,
                                      const SoftTargets &targets,
                                      const Vector &weights = {});

/// log_likelihood minus the ridge penalty of `config`; the quantity the
/// fitting routines maximise.
double penalized_objective(const SoftmaxParams &params, const Matrix &features,
                           const SoftTargets &targets, const Vector &weights,
                           double l2_penalty);

struct SoftmaxFit {
  SoftmaxParams params;
  /// Penalised objective after every accepted step, starting at the
  /// initial point.
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
};

/// Maximises the penalised soft-target objective with damped Newton steps on
/// internally standardised features. Step lengths are halved until the
/// objective does not decrease, so the trace is monotone.
SoftmaxFit fit_soft_detailed(const Matrix &features, const SoftTargets &targets,
                             const Vector &weights, const FitConfig &config,
                             const SoftmaxParams *initial = nullptr);

SoftmaxParams fit_soft(const Matrix &features, const SoftTargets &targets,
                       const FitConfig &config);

/// Warm-started variant.
SoftmaxParams fit_soft(const Matrix &features, const SoftTargets &targets,
                       const FitConfig &config, const SoftmaxParams &initial);

/// Hard-label fit on the selected feature block; uses the dataset's sample
/// weights when present. Throws ValidationError("degenerate labels") when
/// fewer than two classes occur.
SoftmaxParams fit_hard(const LabeledDataset &data, FeatureBlock block,
                       const FitConfig &config);

/// Lowest-index argmax of each row, as 1-based labels.
Labels argmax_labels(const PosteriorMatrix &posterior);

}  // namespace cpsm
