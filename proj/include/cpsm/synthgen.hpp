#pragma once

#include "cpsm/softmax.hpp"
#include "cpsm/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cpsm {

/// Law of the conditioning features in the synthetic benchmarks.
enum class ZDistribution {
  Bernoulli,  // z_j ~ Bernoulli(0.5)
  Gaussian,   // z_j ~ N(0, 1)
};

std::string to_string(ZDistribution d);
ZDistribution parse_z_distribution(const std::string &s);

/// Synthetic source/target pair. Class 1 is the positive label ("y = 1"),
/// class 2 the negative one. Source labels are independent of z; target
/// labels follow sigmoid(theta0 + k * sum(z)) with theta0 calibrated so the
/// target prior equals `target_prior`. Given (y, z), x ~ N(mu, I) with
/// mu = (1[y=1], z_1, ..., z_dz, 0, ..., 0) in both domains.
struct SynthConfig {
  ZDistribution dataset_kind = ZDistribution::Bernoulli;
  int n_source = 5000;
  int n_target = 5000;
  int d_z = 5;
  int d_x = 10;
  double source_cond_prob = 0.05;
  double shift_slope = 0.0;
  double target_prior = 0.05;
  std::uint64_t seed = 0;
  /// Seed of the Monte Carlo sample used to calibrate theta0 for Gaussian z;
  /// kept separate so every repetition shares the same population.
  std::uint64_t calibration_seed = 0;

  void validate() const;
};

/// Intercept theta0 with E_z[sigmoid(theta0 + k * sum(z))] = target_prior.
/// Bernoulli z uses the exact expectation over the 2^d_z patterns, Gaussian
/// z a 10^6-draw Monte Carlo average. Solved by bisection on [-30, 30];
/// throws ValidationError when the target is outside the bracket.
double calibrate_intercept(double shift_slope, double target_prior,
                           ZDistribution z_dist, int d_z, std::uint64_t seed = 0);

/// E_z[sigmoid(theta0 + k * sum(z))] as used by calibrate_intercept.
double expected_target_prior(double theta0, double shift_slope, ZDistribution z_dist,
                             int d_z, std::uint64_t seed = 0);

struct SyntheticPair {
  LabeledDataset source;
  LabeledDataset target;  // labels for evaluation only
  double theta0 = 0.0;
};

SyntheticPair generate_pair(const SynthConfig &config);

/// Gaussian generative family: z ~ N(0, I_d), y ~ softmax(conditional; z),
/// x | y, z ~ N(M z + a_y, I_p). Under it p(y|x,z) is again a softmax.
struct GaussianGenConfig {
  Matrix mixing_matrix;              // p x d
  std::vector<Vector> class_offsets;  // K vectors of length p
  SoftmaxParams conditional_params;   // over the d z features

  int n_classes() const { return static_cast<int>(class_offsets.size()); }
  void validate() const;
};

LabeledDataset generate_gaussian_family(const GaussianGenConfig &config, int n,
                                        std::uint64_t seed);

/// Closed-form p(y|x,z) of the Gaussian family, expressed as a softmax
/// model over the features [x, z].
SoftmaxParams gaussian_family_posterior(const GaussianGenConfig &config);

/// Resampling protocol that induces a conditional shift on a labeled binary
/// dataset with a binary conditioning column: source rates
/// P(y=1|z=0) = P(y=1|z=1) = a, target rates a and a + k.
struct ShiftProtocolConfig {
  double base_rate = 0.05;    // a
  double shift_delta = 0.0;   // k
  int conditioning_column = 0;  // index into the z block
  int n_source = 5000;
  int n_target = 5000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Stratified resampling with replacement. Each domain keeps the input's
/// empirical P(z=1); within a z stratum the positive count is the rounded
/// target rate times the stratum size. Throws ValidationError naming any
/// (y, z) stratum that is needed but empty.
std::pair<LabeledDataset, LabeledDataset> induce_conditional_shift(
    const LabeledDataset &data, const ShiftProtocolConfig &config);

}  // namespace cpsm
