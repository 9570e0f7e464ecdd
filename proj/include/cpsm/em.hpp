#pragma once

#include "cpsm/softmax.hpp"
#include "cpsm/types.hpp"

#include <vector>

namespace cpsm {

/// Models estimated once on the labeled source sample.
struct SourceModels {
  SoftmaxParams posterior_model;    // p(y|x,z), features [x, z]
  SoftmaxParams conditional_model;  // p(y|z), features z

  void validate(Eigen::Index dz, Eigen::Index dx) const;
};

/// Fits both source models on the labeled source data.
SourceModels fit_source_models(const LabeledDataset &source,
                               const FitConfig &config);

struct EmConfig {
  /// Zero is allowed and returns the initial (unadjusted) posterior.
  int max_em_iters = 500;
  /// Stop once the surrogate log-likelihood improves by less than this.
  double em_tolerance = 1e-8;
  /// Solver settings for each warm-started M-step.
  FitConfig inner{200, 0.1, 1e-7, 0.0, 0};

  void validate() const;
};

struct CpsmFit {
  SoftmaxParams theta_hat;  // q(y|z) on the target domain
  PosteriorMatrix target_posterior;
  /// Surrogate observed log-likelihood at the initial point and after every
  /// EM iteration.
  std::vector<double> loglik_trace;
  int iterations_run = 0;
  Vector estimated_prior;  // column mean of target_posterior
};

/// Responsibilities q_theta(y|x,z) for the target rows.
SoftTargets e_step(const SourceModels &source, const UnlabeledDataset &target,
                   const SoftmaxParams &theta);

SoftmaxParams m_step(const Matrix &target_z, const SoftTargets &responsibilities,
                     const FitConfig &inner);

/// M-step warm-started from the previous estimate.
SoftmaxParams m_step(const Matrix &target_z, const SoftTargets &responsibilities,
                     const FitConfig &inner, const SoftmaxParams &previous);

/// EM estimate of the target conditional model, starting from the source
/// conditional model so that iteration 0 reproduces naive_posterior.
/// Throws NumericalError naming the iteration if the surrogate turns
/// non-finite.
CpsmFit fit_cpsm(const SourceModels &source, const UnlabeledDataset &target,
                 const EmConfig &config);

/// Prior-only adaptation: fit_cpsm with an empty conditioning block and an
/// intercept-only source model encoding `source_prior`. The target's z block
/// is folded into the posterior model's features, so z only enters through
/// p(y|x,z).
CpsmFit fit_mlls(const SoftmaxParams &posterior_model, const Vector &source_prior,
                 const UnlabeledDataset &target, const EmConfig &config);

/// The source posterior model applied to the target without correction.
PosteriorMatrix naive_posterior(const SourceModels &source,
                                const UnlabeledDataset &target);

/// Empirical (weighted) class frequencies of a labeled dataset.
Vector class_frequencies(const LabeledDataset &data);

}  // namespace cpsm
