#include "cpsm/types.hpp"

#include "cpsm/error.hpp"

#include <cmath>
#include <string>

namespace cpsm {

namespace {

void validate_stochastic(const Matrix &probs, double tol, const char *what) {
  if (probs.cols() < 2) {
    throw ValidationError(std::string(what) + ": need at least 2 classes");
  }
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < probs.cols(); ++k) {
      const double v = probs(i, k);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw ValidationError(std::string(what) + ": entry (" +
                              std::to_string(i) + ", " + std::to_string(k) +
                              ") outside [0, 1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw ValidationError(std::string(what) + ": row " + std::to_string(i) +
                            " sums to " + std::to_string(sum));
    }
  }
}

}  // namespace

void PosteriorMatrix::validate(double tol) const {
  validate_stochastic(probs, tol, "posterior matrix");
}

void SoftTargets::validate(double tol) const {
  validate_stochastic(probs, tol, "soft targets");
}

SoftTargets SoftTargets::one_hot(const Labels &y, int n_classes) {
  SoftTargets t{Matrix::Zero(y.size(), n_classes)};
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) < 1 || y(i) > n_classes) {
      throw ValidationError("label " + std::to_string(y(i)) + " at row " +
                            std::to_string(i) + " outside {1.." +
                            std::to_string(n_classes) + "}");
    }
    t.probs(i, y(i) - 1) = 1.0;
  }
  return t;
}

void LabeledDataset::validate() const {
  const auto n = y.size();
  if (n_classes < 2) throw ValidationError("n_classes must be >= 2");
  if (z.rows() != n || x.rows() != n) {
    throw ValidationError("row counts of z, x and y differ");
  }
  if (n == 0) throw ValidationError("empty dataset");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y(i) < 1 || y(i) > n_classes) {
      throw ValidationError("label " + std::to_string(y(i)) + " at row " +
                            std::to_string(i) + " outside {1.." +
                            std::to_string(n_classes) + "}");
    }
  }
  if (sample_weights) {
    if (sample_weights->size() != n) {
      throw ValidationError("sample_weights length differs from row count");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = (*sample_weights)(i);
      if (!std::isfinite(w) || w < 0.0) {
        throw ValidationError("negative or non-finite sample weight at row " +
                              std::to_string(i));
      }
    }
  }
}

void UnlabeledDataset::validate() const {
  if (z.rows() != x.rows()) throw ValidationError("row counts of z and x differ");
}

Matrix full_features(const Matrix &x, const Matrix &z) {
  if (x.rows() != z.rows()) throw ValidationError("row counts of z and x differ");
  Matrix out(x.rows(), x.cols() + z.cols());
  out.leftCols(x.cols()) = x;
  out.rightCols(z.cols()) = z;
  return out;
}

Vector column_mean(const Matrix &probs) {
  Vector mean = Vector::Zero(probs.cols());
  if (probs.rows() == 0) return mean;
  for (Eigen::Index k = 0; k < probs.cols(); ++k) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) s += probs(i, k);
    mean(k) = s / static_cast<double>(probs.rows());
  }
  return mean;
}

}  // namespace cpsm
