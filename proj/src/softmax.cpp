#include "cpsm/softmax.hpp"

#include "cpsm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cpsm {

SoftmaxParams SoftmaxParams::zeros(int n_classes, int n_features) {
  if (n_classes < 2) throw ValidationError("n_classes must be >= 2");
  if (n_features < 0) throw ValidationError("n_features must be >= 0");
  return {n_classes, Vector::Zero(n_classes - 1),
          Matrix::Zero(n_classes - 1, n_features)};
}

SoftmaxParams SoftmaxParams::from_full(const Vector &intercepts,
                                       const Matrix &slopes) {
  const auto k = intercepts.size();
  if (k < 2 || slopes.rows() != k) {
    throw ValidationError("full parameterisation needs K >= 2 matching rows");
  }
  SoftmaxParams p = zeros(static_cast<int>(k), static_cast<int>(slopes.cols()));
  p.intercepts = intercepts.head(k - 1).array() - intercepts(k - 1);
  p.slopes = slopes.topRows(k - 1).rowwise() - slopes.row(k - 1);
  return p;
}

SoftmaxParams SoftmaxParams::from_prior(const Vector &prior) {
  const auto k = prior.size();
  if (k < 2) throw ValidationError("prior needs at least 2 classes");
  if ((prior.array() <= 0.0).any() || std::abs(prior.sum() - 1.0) > 1e-9) {
    throw ValidationError("prior must be strictly positive and sum to 1");
  }
  SoftmaxParams p = zeros(static_cast<int>(k), 0);
  for (Eigen::Index c = 0; c + 1 < k; ++c) {
    p.intercepts(c) = std::log(prior(c)) - std::log(prior(k - 1));
  }
  return p;
}

void SoftmaxParams::validate() const {
  if (n_classes < 2) throw ValidationError("n_classes must be >= 2");
  if (intercepts.size() != n_classes - 1 || slopes.rows() != n_classes - 1) {
    throw ValidationError("parameter block does not have K - 1 rows");
  }
  if (!intercepts.allFinite() || !slopes.allFinite()) {
    throw NumericalError("non-finite model parameters");
  }
}

bool operator==(const SoftmaxParams &a, const SoftmaxParams &b) {
  return a.n_classes == b.n_classes && a.intercepts.size() == b.intercepts.size() &&
         a.slopes.rows() == b.slopes.rows() && a.slopes.cols() == b.slopes.cols() &&
         a.intercepts == b.intercepts && a.slopes == b.slopes;
}

double max_abs_diff(const SoftmaxParams &a, const SoftmaxParams &b) {
  if (a.n_classes != b.n_classes || a.n_features() != b.n_features()) {
    throw ValidationError("parameter shapes differ");
  }
  double d = (a.intercepts - b.intercepts).cwiseAbs().maxCoeff();
  if (a.slopes.size() > 0) {
    d = std::max(d, (a.slopes - b.slopes).cwiseAbs().maxCoeff());
  }
  return d;
}

void FitConfig::validate() const {
  if (max_iters < 0) throw ValidationError("max_iters must be >= 0");
  if (!(step_size > 0.0)) throw ValidationError("step_size must be positive");
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  if (!(l2_penalty >= 0.0)) throw ValidationError("l2_penalty must be >= 0");
}

namespace {

void check_features(const SoftmaxParams &params, const Matrix &features) {
  if (features.cols() != params.n_features()) {
    throw ValidationError("feature count " + std::to_string(features.cols()) +
                          " does not match model (" +
                          std::to_string(params.n_features()) + ")");
  }
}

void check_targets(const Matrix &features, const SoftTargets &targets,
                   int n_classes, const Vector &weights) {
  if (targets.rows() != features.rows()) {
    throw ValidationError("targets and features have different row counts");
  }
  if (targets.n_classes() != n_classes) {
    throw ValidationError("targets have " + std::to_string(targets.n_classes()) +
                          " classes, model has " + std::to_string(n_classes));
  }
  if (weights.size() != 0 && weights.size() != features.rows()) {
    throw ValidationError("weights length differs from row count");
  }
}

// Fills `probs` (n x K) from reference-form scores (n x (K-1)) and returns
// the per-row log normaliser.
Vector softmax_rows(const Matrix &scores, Matrix &probs) {
  const auto n = scores.rows();
  const auto km1 = scores.cols();
  probs.resize(n, km1 + 1);
  Vector lse(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = 0.0;  // reference class score
    for (Eigen::Index k = 0; k < km1; ++k) m = std::max(m, scores(i, k));
    double sum = std::exp(-m);
    probs(i, km1) = sum;
    for (Eigen::Index k = 0; k < km1; ++k) {
      const double e = std::exp(scores(i, k) - m);
      probs(i, k) = e;
      sum += e;
    }
    probs.row(i) /= sum;
    lse(i) = m + std::log(sum);
  }
  return lse;
}

Matrix reference_scores(const SoftmaxParams &params, const Matrix &features) {
  Matrix s = features * params.slopes.transpose();
  s.rowwise() += params.intercepts.transpose();
  return s;
}

}  // namespace

Matrix class_scores(const SoftmaxParams &params, const Matrix &features) {
  params.validate();
  check_features(params, features);
  Matrix s(features.rows(), params.n_classes);
  s.leftCols(params.n_classes - 1) = reference_scores(params, features);
  s.col(params.n_classes - 1).setZero();
  return s;
}

PosteriorMatrix predict_proba(const SoftmaxParams &params,
                              const Matrix &features) {
  params.validate();
  check_features(params, features);
  PosteriorMatrix out;
  softmax_rows(reference_scores(params, features), out.probs);
  return out;
}

double log_likelihood(const SoftmaxParams &params, const Matrix &features,
                      const SoftTargets &targets, const Vector &weights) {
  params.validate();
  check_features(params, features);
  check_targets(features, targets, params.n_classes, weights);
  const Matrix s = reference_scores(params, features);
  Matrix probs;
  const Vector lse = softmax_rows(s, probs);
  const auto km1 = s.cols();
  double total = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    double row = -lse(i) * targets.probs.row(i).sum();
    for (Eigen::Index k = 0; k < km1; ++k) row += targets.probs(i, k) * s(i, k);
    total += (weights.size() ? weights(i) : 1.0) * row;
  }
  return total;
}

SoftmaxParams log_likelihood_gradient(const SoftmaxParams &params,
                                      const Matrix &features,
                                      const SoftTargets &targets,
                                      const Vector &weights) {
  params.validate();
  check_features(params, features);
  check_targets(features, targets, params.n_classes, weights);
  Matrix probs;
  softmax_rows(reference_scores(params, features), probs);
  const auto km1 = params.n_classes - 1;
  Matrix resid = targets.probs.leftCols(km1) - probs.leftCols(km1);
  if (weights.size()) resid = weights.asDiagonal() * resid;
  SoftmaxParams g = SoftmaxParams::zeros(params.n_classes, params.n_features());
  g.intercepts = resid.colwise().sum().transpose();
  g.slopes = resid.transpose() * features;
  return g;
}

double penalized_objective(const SoftmaxParams &params, const Matrix &features,
                           const SoftTargets &targets, const Vector &weights,
                           double l2_penalty) {
  return log_likelihood(params, features, targets, weights) -
         0.5 * l2_penalty * params.slopes.squaredNorm();
}

namespace {

// The ascent runs on standardised features f~ = (f - m) / s. The objective
// is the same function of the original parameters, so the ridge term is
// evaluated on w / s.
// Longest Newton step, in standardised units, tried by the line search.
constexpr double kMaxStep = 10.0;
constexpr double kStallGain = 1e-10;

class StandardizedProblem {
 public:
  StandardizedProblem(const Matrix &features, const SoftTargets &targets,
                      const Vector &weights, double l2)
      : targets_(targets.probs.leftCols(targets.n_classes() - 1)),
        target_mass_(targets.probs.rowwise().sum()),
        l2_(l2) {
    const auto n = features.rows();
    const auto d = features.cols();
    weights_ = weights.size() ? weights : Vector::Ones(n);
    total_weight_ = weights_.sum();
    center_ = Vector::Zero(d);
    scale_ = Vector::Ones(d);
    std_features_.resize(n, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto col = features.col(j);
      const double mean = n ? col.mean() : 0.0;
      const double var =
          n ? (col.array() - mean).square().sum() / static_cast<double>(n) : 0.0;
      const double sd = std::sqrt(var);
      center_(j) = mean;
      if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
        scale_(j) = sd;
        std_features_.col(j) = (col.array() - mean) / sd;
      } else {
        std_features_.col(j).setZero();
      }
    }
    aug_features_.resize(n, d + 1);
    aug_features_.col(0).setOnes();
    aug_features_.rightCols(d) = std_features_;
  }

  Eigen::Index km1() const { return targets_.cols(); }
  Eigen::Index dims() const { return std_features_.cols(); }
  double total_weight() const { return total_weight_; }

  void to_internal(const SoftmaxParams &p, Matrix &w, Vector &b) const {
    w = p.slopes.transpose();  // d x (K-1)
    for (Eigen::Index j = 0; j < w.rows(); ++j) w.row(j) *= scale_(j);
    b = p.intercepts + p.slopes * center_;
  }

  SoftmaxParams to_external(int n_classes, const Matrix &w, const Vector &b) const {
    SoftmaxParams p = SoftmaxParams::zeros(n_classes, static_cast<int>(dims()));
    for (Eigen::Index j = 0; j < w.rows(); ++j) {
      p.slopes.col(j) = w.row(j).transpose() / scale_(j);
    }
    p.intercepts = b - p.slopes * center_;
    return p;
  }

  // Objective value; leaves the probabilities of the evaluated point in
  // probs_ for a subsequent derivatives() call.
  double value(const Matrix &w, const Vector &b) {
    Matrix s = std_features_ * w;
    s.rowwise() += b.transpose();
    const Vector lse = softmax_rows(s, probs_);
    double total = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      double row = -lse(i) * target_mass_(i);
      for (Eigen::Index k = 0; k < s.cols(); ++k) row += targets_(i, k) * s(i, k);
      total += weights_(i) * row;
    }
    double pen = 0.0;
    for (Eigen::Index j = 0; j < w.rows(); ++j) {
      pen += w.row(j).squaredNorm() / (scale_(j) * scale_(j));
    }
    return total - 0.5 * l2_ * pen;
  }

  // Gradient and negated Hessian at the point last passed to value(), over
  // the stacked parameter vector [b_1, w_1, ..., b_{K-1}, w_{K-1}].
  void derivatives(const Matrix &w, Vector &grad, Matrix &neg_hess) const {
    const auto p = probs_.leftCols(km1());
    const Eigen::Index m = km1();
    const Eigen::Index blk = dims() + 1;
    const Matrix resid = weights_.asDiagonal() * (targets_ - p);
    grad.resize(m * blk);
    neg_hess.resize(m * blk, m * blk);
    Matrix weighted(aug_features_.rows(), blk);
    for (Eigen::Index c = 0; c < m; ++c) {
      grad(c * blk) = resid.col(c).sum();
      grad.segment(c * blk + 1, dims()) = std_features_.transpose() * resid.col(c);
      for (Eigen::Index c2 = c; c2 < m; ++c2) {
        Vector coef = p.col(c).cwiseProduct(p.col(c2));
        if (c == c2) coef = p.col(c) - coef;
        else coef = -coef;
        weighted = (weights_.cwiseProduct(coef)).asDiagonal() * aug_features_;
        const Matrix block = aug_features_.transpose() * weighted;
        neg_hess.block(c * blk, c2 * blk, blk, blk) = block;
        if (c2 != c) neg_hess.block(c2 * blk, c * blk, blk, blk) = block.transpose();
      }
      for (Eigen::Index j = 0; j < dims(); ++j) {
        const double inv_s2 = 1.0 / (scale_(j) * scale_(j));
        const Eigen::Index idx = c * blk + 1 + j;
        grad(idx) -= l2_ * inv_s2 * w(j, c);
        neg_hess(idx, idx) += l2_ * inv_s2;
      }
    }
  }

  Vector stack(const Matrix &w, const Vector &b) const {
    const Eigen::Index blk = dims() + 1;
    Vector v(km1() * blk);
    for (Eigen::Index c = 0; c < km1(); ++c) {
      v(c * blk) = b(c);
      v.segment(c * blk + 1, dims()) = w.col(c);
    }
    return v;
  }

  void unstack(const Vector &v, Matrix &w, Vector &b) const {
    const Eigen::Index blk = dims() + 1;
    w.resize(dims(), km1());
    b.resize(km1());
    for (Eigen::Index c = 0; c < km1(); ++c) {
      b(c) = v(c * blk);
      w.col(c) = v.segment(c * blk + 1, dims());
    }
  }

 private:
  Matrix std_features_;
  Matrix aug_features_;
  Matrix targets_;
  Vector target_mass_;
  Vector weights_;
  Vector center_;
  Vector scale_;
  Matrix probs_;
  double total_weight_ = 0.0;
  double l2_;
};

}  // namespace

SoftmaxFit fit_soft_detailed(const Matrix &features, const SoftTargets &targets,
                             const Vector &weights, const FitConfig &config,
                             const SoftmaxParams *initial) {
  config.validate();
  targets.validate();
  const int n_classes = targets.n_classes();
  check_targets(features, targets, n_classes, weights);
  if (!features.allFinite()) throw NumericalError("non-finite features");
  if (initial) {
    initial->validate();
    if (initial->n_classes != n_classes) {
      throw ValidationError("initial parameters have a different class count");
    }
    check_features(*initial, features);
  }

  StandardizedProblem problem(features, targets, weights, config.l2_penalty);
  Matrix w;
  Vector b;
  problem.to_internal(
      initial ? *initial
              : SoftmaxParams::zeros(n_classes, static_cast<int>(features.cols())),
      w, b);

  SoftmaxFit fit;
  double value = problem.value(w, b);
  if (!std::isfinite(value)) throw NumericalError("non-finite objective at start");
  fit.objective_trace.push_back(value);

  Vector theta = problem.stack(w, b);
  Vector grad;
  Matrix neg_hess;
  problem.derivatives(w, grad, neg_hess);

  const double damping = 1e-10 * std::max(1.0, problem.total_weight());
  Eigen::LDLT<Matrix> solver;
  double last_eta = 1.0;
  int iter = 0;
  for (; iter < config.max_iters; ++iter) {
    neg_hess.diagonal().array() += damping;
    solver.compute(neg_hess);
    Vector step = solver.solve(grad);
    if (solver.info() != Eigen::Success || !step.allFinite()) {
      // Curvature is unusable; fall back to the scaled gradient.
      step = grad / std::max(1.0, neg_hess.diagonal().maxCoeff());
    }
    const double largest = step.size() ? step.cwiseAbs().maxCoeff() : 0.0;
    if (largest < config.tolerance) {
      fit.converged = true;
      break;
    }
    if (largest > kMaxStep) step *= kMaxStep / largest;
    bool accepted = false;
    bool full_step = false;
    const double previous = value;
    for (double eta = std::min(1.0, 2.0 * last_eta); eta >= 1e-16; eta *= 0.5) {
      const Vector trial_theta = theta + eta * step;
      problem.unstack(trial_theta, w, b);
      const double trial = problem.value(w, b);
      if (std::isfinite(trial) && trial >= value) {
        theta = trial_theta;
        value = trial;
        accepted = true;
        full_step = eta == 1.0;
        last_eta = eta;
        break;
      }
    }
    if (!accepted) {
      // No representable ascent step remains along this direction.
      problem.unstack(theta, w, b);
      fit.converged = true;
      break;
    }
    fit.objective_trace.push_back(value);
    if (full_step && value - previous <= kStallGain * std::max(1.0, std::abs(value))) {
      // Supremum reached to working precision; typical when the optimum
      // lies at infinity under separation.
      fit.converged = true;
      break;
    }
    problem.derivatives(w, grad, neg_hess);
  }
  problem.unstack(theta, w, b);
  fit.iterations = static_cast<int>(fit.objective_trace.size()) - 1;
  fit.params = problem.to_external(n_classes, w, b);
  if (!fit.params.intercepts.allFinite() || !fit.params.slopes.allFinite()) {
    throw NumericalError("fit produced non-finite parameters");
  }
  return fit;
}

SoftmaxParams fit_soft(const Matrix &features, const SoftTargets &targets,
                       const FitConfig &config) {
  return fit_soft_detailed(features, targets, Vector{}, config).params;
}

SoftmaxParams fit_soft(const Matrix &features, const SoftTargets &targets,
                       const FitConfig &config, const SoftmaxParams &initial) {
  return fit_soft_detailed(features, targets, Vector{}, config, &initial).params;
}

SoftmaxParams fit_hard(const LabeledDataset &data, FeatureBlock block,
                       const FitConfig &config) {
  data.validate();
  int first = data.y(0);
  bool two_classes = false;
  for (Eigen::Index i = 1; i < data.y.size() && !two_classes; ++i) {
    two_classes = data.y(i) != first;
  }
  if (!two_classes) throw ValidationError("degenerate labels");
  const Matrix f = features(data, block);
  const SoftTargets targets = SoftTargets::one_hot(data.y, data.n_classes);
  return fit_soft_detailed(f, targets,
                           data.sample_weights ? *data.sample_weights : Vector{},
                           config)
      .params;
}

Labels argmax_labels(const PosteriorMatrix &posterior) {
  Labels out(posterior.rows());
  for (Eigen::Index i = 0; i < posterior.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < posterior.probs.cols(); ++k) {
      if (posterior.probs(i, k) > posterior.probs(i, best)) best = k;
    }
    out(i) = static_cast<int>(best) + 1;
  }
  return out;
}

}  // namespace cpsm
