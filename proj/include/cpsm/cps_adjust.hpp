#pragma once

#include "cpsm/types.hpp"

#include <cstddef>

namespace cpsm {

/// Probabilities below this (or above 1 - this) are clamped before they
/// enter a ratio or a logarithm.
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kRatioMin = 1e-12;
inline constexpr double kRatioMax = 1e12;

/// q(y=k|z) over p(y=k|z), both evaluated on the same rows.
struct ConditionalRatios {
  Matrix numerator;    // target conditional q(y=k|z)
  Matrix denominator;  // source conditional p(y=k|z)

  /// Clamped ratio matrix.
  Matrix ratios() const;
};

struct AdjustedPosterior {
  PosteriorMatrix posterior;
  /// Per-row sum_l p(y=l|x,z) * ratio_l, i.e. the reciprocal of r(x,z).
  Vector normalizer;
  /// Number of probabilities or ratios that hit a clamp bound. Non-zero
  /// values flag inputs that are inconsistent with the shift model.
  std::size_t clamped = 0;
};

/// Reweights each source posterior row by the class ratios and renormalises.
/// Rows whose ratios are all exactly 1 are returned unchanged.
AdjustedPosterior adjust_posterior(const PosteriorMatrix &source_posterior,
                                   const ConditionalRatios &ratios);

/// Same transform from a precomputed n x K ratio matrix. Only the ratios'
/// relative sizes within a row matter.
AdjustedPosterior adjust_with_ratios(const PosteriorMatrix &source_posterior,
                                     const Matrix &ratios);

/// sum over rows of log(normalizer): the part of the target observed-data
/// log-likelihood that depends on the target conditional model.
double surrogate_observed_loglik(const PosteriorMatrix &source_posterior,
                                 const ConditionalRatios &ratios);

}  // namespace cpsm
