#pragma once

#include <Eigen/Dense>

#include <optional>

namespace cpsm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = Eigen::VectorXi;

/// Row-stochastic n x K matrix of class probabilities. Column k holds
/// class k + 1.
struct PosteriorMatrix {
  Matrix probs;

  Eigen::Index rows() const { return probs.rows(); }
  int n_classes() const { return static_cast<int>(probs.cols()); }

  /// Throws ValidationError unless rows sum to 1 within `tol` and all
  /// entries lie in [0, 1].
  void validate(double tol = 1e-9) const;
};

/// Per-sample class-probability targets for the soft-label fit. Same
/// layout and invariants as PosteriorMatrix; kept as a separate type so the
/// E-step output cannot be confused with a model prediction.
struct SoftTargets {
  Matrix probs;

  Eigen::Index rows() const { return probs.rows(); }
  int n_classes() const { return static_cast<int>(probs.cols()); }
  void validate(double tol = 1e-9) const;

  static SoftTargets one_hot(const Labels &y, int n_classes);
  static SoftTargets from_posterior(const PosteriorMatrix &p) {
    return SoftTargets{p.probs};
  }
};

/// Features split into the conditioning block `z` and the remaining block
/// `x`. Labels are 1-based class indices in {1..n_classes}.
struct LabeledDataset {
  Matrix z;
  Matrix x;
  Labels y;
  int n_classes = 2;
  std::optional<Vector> sample_weights;

  Eigen::Index rows() const { return y.size(); }
  Eigen::Index dz() const { return z.cols(); }
  Eigen::Index dx() const { return x.cols(); }

  void validate() const;
};

struct UnlabeledDataset {
  Matrix z;
  Matrix x;

  Eigen::Index rows() const { return z.rows(); }
  Eigen::Index dz() const { return z.cols(); }
  Eigen::Index dx() const { return x.cols(); }

  void validate() const;
  static UnlabeledDataset from(const LabeledDataset &d) { return {d.z, d.x}; }
};

/// Feature block a model is fit on.
enum class FeatureBlock {
  Conditioning,  // z only
  Full,          // x followed by z
};

/// Concatenates [x, z] column-wise; the layout every full-feature model uses.
Matrix full_features(const Matrix &x, const Matrix &z);

inline Matrix features(const LabeledDataset &d, FeatureBlock block) {
  return block == FeatureBlock::Full ? full_features(d.x, d.z) : d.z;
}

inline Matrix features(const UnlabeledDataset &d, FeatureBlock block) {
  return block == FeatureBlock::Full ? full_features(d.x, d.z) : d.z;
}

/// Column means of a probability matrix.
Vector column_mean(const Matrix &probs);

}  // namespace cpsm
