#include "cpsm/cps_adjust.hpp"

#include "cpsm/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cpsm {

namespace {

double clamp_prob(double p, std::size_t &clamped) {
  if (p < kProbFloor) {
    ++clamped;
    return kProbFloor;
  }
  if (p > 1.0 - kProbFloor) {
    ++clamped;
    return 1.0 - kProbFloor;
  }
  return p;
}

Matrix clamped_ratios(const ConditionalRatios &r, std::size_t &clamped) {
  if (r.numerator.rows() != r.denominator.rows() ||
      r.numerator.cols() != r.denominator.cols()) {
    throw ValidationError("ratio numerator and denominator shapes differ");
  }
  Matrix out(r.numerator.rows(), r.numerator.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index k = 0; k < out.cols(); ++k) {
      const double num = r.numerator(i, k);
      const double den = r.denominator(i, k);
      if (!std::isfinite(num) || !std::isfinite(den)) {
        throw NumericalError("non-finite conditional probability at row " +
                             std::to_string(i));
      }
      double ratio = clamp_prob(num, clamped) / clamp_prob(den, clamped);
      if (ratio < kRatioMin || ratio > kRatioMax) {
        ++clamped;
        ratio = std::clamp(ratio, kRatioMin, kRatioMax);
      }
      out(i, k) = ratio;
    }
  }
  return out;
}

AdjustedPosterior adjust_impl(const PosteriorMatrix &source, const Matrix &ratios,
                              std::size_t clamped) {
  if (source.probs.rows() != ratios.rows() || source.probs.cols() != ratios.cols()) {
    throw ValidationError("posterior has shape " +
                          std::to_string(source.probs.rows()) + "x" +
                          std::to_string(source.probs.cols()) + ", ratios " +
                          std::to_string(ratios.rows()) + "x" +
                          std::to_string(ratios.cols()));
  }
  const auto n = ratios.rows();
  const auto k = ratios.cols();
  AdjustedPosterior out;
  out.clamped = clamped;
  out.posterior.probs.resize(n, k);
  out.normalizer.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double weighted = 0.0;
    double mass = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      weighted += source.probs(i, c) * ratios(i, c);
      mass += source.probs(i, c);
    }
    // Dividing by the row mass keeps rows with unit ratios bit-identical.
    const double norm = weighted / mass;
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw NumericalError("zero normalizer at row " + std::to_string(i));
    }
    out.normalizer(i) = norm;
    for (Eigen::Index c = 0; c < k; ++c) {
      out.posterior.probs(i, c) = source.probs(i, c) * (ratios(i, c) / norm);
    }
  }
  return out;
}

}  // namespace

Matrix ConditionalRatios::ratios() const {
  std::size_t unused = 0;
  return clamped_ratios(*this, unused);
}

AdjustedPosterior adjust_posterior(const PosteriorMatrix &source_posterior,
                                   const ConditionalRatios &ratios) {
  std::size_t clamped = 0;
  const Matrix r = clamped_ratios(ratios, clamped);
  return adjust_impl(source_posterior, r, clamped);
}

AdjustedPosterior adjust_with_ratios(const PosteriorMatrix &source_posterior,
                                     const Matrix &ratios) {
  if (!ratios.allFinite() || (ratios.array() <= 0.0).any()) {
    throw ValidationError("ratios must be finite and positive");
  }
  return adjust_impl(source_posterior, ratios, 0);
}

double surrogate_observed_loglik(const PosteriorMatrix &source_posterior,
                                 const ConditionalRatios &ratios) {
  const AdjustedPosterior adj = adjust_posterior(source_posterior, ratios);
  double total = 0.0;
  for (Eigen::Index i = 0; i < adj.normalizer.size(); ++i) {
    total += std::log(adj.normalizer(i));
  }
  return total;
}

}  // namespace cpsm
