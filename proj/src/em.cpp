#include "cpsm/em.hpp"

#include "cpsm/cps_adjust.hpp"
#include "cpsm/error.hpp"

#include <cmath>
#include <string>

namespace cpsm {

void SourceModels::validate(Eigen::Index dz, Eigen::Index dx) const {
  posterior_model.validate();
  conditional_model.validate();
  if (posterior_model.n_classes != conditional_model.n_classes) {
    throw ValidationError("source models disagree on the number of classes");
  }
  if (conditional_model.n_features() != dz) {
    throw ValidationError("conditional model expects " +
                          std::to_string(conditional_model.n_features()) +
                          " z features, data has " + std::to_string(dz));
  }
  if (posterior_model.n_features() != dx + dz) {
    throw ValidationError("posterior model expects " +
                          std::to_string(posterior_model.n_features()) +
                          " features, data has " + std::to_string(dx + dz));
  }
}

SourceModels fit_source_models(const LabeledDataset &source,
                               const FitConfig &config) {
  return {fit_hard(source, FeatureBlock::Full, config),
          fit_hard(source, FeatureBlock::Conditioning, config)};
}

void EmConfig::validate() const {
  if (max_em_iters < 0) throw ValidationError("max_em_iters must be >= 0");
  if (!(em_tolerance > 0.0)) throw ValidationError("em_tolerance must be positive");
  inner.validate();
}

namespace {

void check_theta(const SourceModels &source, const SoftmaxParams &theta) {
  theta.validate();
  if (theta.n_classes != source.conditional_model.n_classes ||
      theta.n_features() != source.conditional_model.n_features()) {
    throw ValidationError("theta does not match the conditional model's shape");
  }
}

double sum_log(const Vector &v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::log(v(i));
  return s;
}

// Source-side quantities are fixed for the whole EM run.
class EStep {
 public:
  EStep(const SourceModels &source, const UnlabeledDataset &target)
      : z_(target.z),
        posterior_(predict_proba(source.posterior_model,
                                 full_features(target.x, target.z))),
        conditional_(predict_proba(source.conditional_model, target.z)) {}

  AdjustedPosterior operator()(const SoftmaxParams &theta) const {
    const PosteriorMatrix q = predict_proba(theta, z_);
    return adjust_posterior(posterior_, {q.probs, conditional_.probs});
  }

  const PosteriorMatrix &source_posterior() const { return posterior_; }

 private:
  const Matrix &z_;
  PosteriorMatrix posterior_;
  PosteriorMatrix conditional_;
};

}  // namespace

SoftTargets e_step(const SourceModels &source, const UnlabeledDataset &target,
                   const SoftmaxParams &theta) {
  target.validate();
  source.validate(target.dz(), target.dx());
  check_theta(source, theta);
  return SoftTargets::from_posterior(EStep(source, target)(theta).posterior);
}

SoftmaxParams m_step(const Matrix &target_z, const SoftTargets &responsibilities,
                     const FitConfig &inner) {
  return fit_soft(target_z, responsibilities, inner);
}

SoftmaxParams m_step(const Matrix &target_z, const SoftTargets &responsibilities,
                     const FitConfig &inner, const SoftmaxParams &previous) {
  return fit_soft(target_z, responsibilities, inner, previous);
}

CpsmFit fit_cpsm(const SourceModels &source, const UnlabeledDataset &target,
                 const EmConfig &config) {
  config.validate();
  target.validate();
  if (target.rows() == 0) throw ValidationError("empty target dataset");
  source.validate(target.dz(), target.dx());

  const EStep estep(source, target);
  SoftmaxParams theta = source.conditional_model;
  AdjustedPosterior current = estep(theta);

  CpsmFit fit;
  fit.loglik_trace.push_back(sum_log(current.normalizer));
  for (int t = 0; t < config.max_em_iters; ++t) {
    SoftmaxParams next =
        m_step(target.z, SoftTargets::from_posterior(current.posterior),
               config.inner, theta);
    AdjustedPosterior adjusted = estep(next);
    const double value = sum_log(adjusted.normalizer);
    if (!std::isfinite(value)) {
      throw NumericalError("non-finite surrogate log-likelihood at EM iteration " +
                           std::to_string(t + 1));
    }
    const double gain = value - fit.loglik_trace.back();
    fit.loglik_trace.push_back(value);
    theta = std::move(next);
    current = std::move(adjusted);
    ++fit.iterations_run;
    if (gain < config.em_tolerance) break;
  }

  fit.theta_hat = std::move(theta);
  fit.target_posterior = std::move(current.posterior);
  fit.estimated_prior = column_mean(fit.target_posterior.probs);
  return fit;
}

CpsmFit fit_mlls(const SoftmaxParams &posterior_model, const Vector &source_prior,
                 const UnlabeledDataset &target, const EmConfig &config) {
  if (source_prior.size() != posterior_model.n_classes) {
    throw ValidationError("source prior length differs from the class count");
  }
  const SourceModels models{posterior_model, SoftmaxParams::from_prior(source_prior)};
  const UnlabeledDataset folded{Matrix(target.rows(), 0),
                                full_features(target.x, target.z)};
  return fit_cpsm(models, folded, config);
}

PosteriorMatrix naive_posterior(const SourceModels &source,
                                const UnlabeledDataset &target) {
  target.validate();
  source.validate(target.dz(), target.dx());
  return predict_proba(source.posterior_model, full_features(target.x, target.z));
}

Vector class_frequencies(const LabeledDataset &data) {
  data.validate();
  Vector counts = Vector::Zero(data.n_classes);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    counts(data.y(i) - 1) += data.sample_weights ? (*data.sample_weights)(i) : 1.0;
  }
  const double total = counts.sum();
  if (!(total > 0.0)) throw ValidationError("dataset has zero total weight");
  return counts / total;
}

}  // namespace cpsm
