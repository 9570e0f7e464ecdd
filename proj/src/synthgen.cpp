#include "cpsm/synthgen.hpp"

#include "cpsm/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <tuple>

namespace cpsm {

namespace {

constexpr int kMonteCarloDraws = 1'000'000;
constexpr double kBracketLo = -30.0;
constexpr double kBracketHi = 30.0;

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

bool in_open_unit(double p) { return p > 0.0 && p < 1.0; }

// Sums z^T 1 of the Monte Carlo calibration sample.
std::vector<double> gaussian_sums(int d_z, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> sums(kMonteCarloDraws);
  for (auto &s : sums) {
    double acc = 0.0;
    for (int j = 0; j < d_z; ++j) acc += normal(rng);
    s = acc;
  }
  return sums;
}

// Expectation of sigmoid(theta0 + k * sum(z)) for a fixed z law.
class PriorCurve {
 public:
  PriorCurve(double k, ZDistribution dist, int d_z, std::uint64_t seed)
      : k_(k), dist_(dist), d_z_(d_z) {
    if (d_z < 0) throw ValidationError("d_z must be >= 0");
    if (dist == ZDistribution::Bernoulli) {
      // P(sum = j) = C(d_z, j) / 2^d_z
      weights_.assign(d_z + 1, 0.0);
      double c = 1.0;
      for (int j = 0; j <= d_z; ++j) {
        weights_[j] = c / std::ldexp(1.0, d_z);
        c = c * (d_z - j) / (j + 1);
      }
    } else if (k != 0.0 && d_z > 0) {
      sums_ = gaussian_sums(d_z, seed);
    }
  }

  double operator()(double theta0) const {
    if (dist_ == ZDistribution::Bernoulli) {
      double e = 0.0;
      for (int j = 0; j <= d_z_; ++j) e += weights_[j] * sigmoid(theta0 + k_ * j);
      return e;
    }
    if (sums_.empty()) return sigmoid(theta0);
    double e = 0.0;
    for (double s : sums_) e += sigmoid(theta0 + k_ * s);
    return e / static_cast<double>(sums_.size());
  }

 private:
  double k_;
  ZDistribution dist_;
  int d_z_;
  std::vector<double> weights_;
  std::vector<double> sums_;
};

double bisect(const PriorCurve &curve, double target) {
  double lo = kBracketLo;
  double hi = kBracketHi;
  if (curve(lo) > target || curve(hi) < target) {
    throw ValidationError("target prior " + std::to_string(target) +
                          " unreachable with theta0 in [-30, 30]");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-11; ++it) {
    const double mid = 0.5 * (lo + hi);
    (curve(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

using CalibrationKey = std::tuple<double, double, int, int, std::uint64_t>;

}  // namespace

std::string to_string(ZDistribution d) {
  return d == ZDistribution::Bernoulli ? "bernoulli_z" : "gaussian_z";
}

ZDistribution parse_z_distribution(const std::string &s) {
  if (s == "bernoulli_z") return ZDistribution::Bernoulli;
  if (s == "gaussian_z") return ZDistribution::Gaussian;
  throw ValidationError("unknown dataset_kind '" + s +
                        "' (expected bernoulli_z or gaussian_z)");
}

void SynthConfig::validate() const {
  if (n_source < 1 || n_target < 1) throw ValidationError("sample sizes must be >= 1");
  if (d_z < 0) throw ValidationError("d_z must be >= 0");
  if (d_x < d_z + 1) throw ValidationError("d_x must be at least d_z + 1");
  if (!in_open_unit(source_cond_prob)) {
    throw ValidationError("source_cond_prob must lie in (0, 1)");
  }
  if (!in_open_unit(target_prior)) throw ValidationError("target_prior must lie in (0, 1)");
  if (!(shift_slope >= 0.0) || !std::isfinite(shift_slope)) {
    throw ValidationError("shift_slope must be finite and >= 0");
  }
}

double expected_target_prior(double theta0, double shift_slope, ZDistribution z_dist,
                             int d_z, std::uint64_t seed) {
  return PriorCurve(shift_slope, z_dist, d_z, seed)(theta0);
}

double calibrate_intercept(double shift_slope, double target_prior,
                           ZDistribution z_dist, int d_z, std::uint64_t seed) {
  if (!in_open_unit(target_prior)) throw ValidationError("target_prior must lie in (0, 1)");
  if (shift_slope == 0.0 || d_z == 0) {
    const double theta0 = std::log(target_prior / (1.0 - target_prior));
    if (theta0 < kBracketLo || theta0 > kBracketHi) {
      throw ValidationError("target prior " + std::to_string(target_prior) +
                            " unreachable with theta0 in [-30, 30]");
    }
    return theta0;
  }
  // Gaussian calibration is costly; results are memoised per argument set.
  static std::mutex mutex;
  static std::map<CalibrationKey, double> cache;
  const CalibrationKey key{shift_slope, target_prior, static_cast<int>(z_dist), d_z,
                           z_dist == ZDistribution::Gaussian ? seed : 0};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const double theta0 = bisect(PriorCurve(shift_slope, z_dist, d_z, seed), target_prior);
  std::lock_guard lock(mutex);
  cache.emplace(key, theta0);
  return theta0;
}

SyntheticPair generate_pair(const SynthConfig &config) {
  config.validate();
  SyntheticPair out;
  out.theta0 = calibrate_intercept(config.shift_slope, config.target_prior,
                                   config.dataset_kind, config.d_z,
                                   config.calibration_seed);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);

  auto make = [&](int n, auto positive_prob) {
    LabeledDataset d;
    d.n_classes = 2;
    d.z.resize(n, config.d_z);
    d.x.resize(n, config.d_x);
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
      // z first so the label can depend on it.
      for (int j = 0; j < config.d_z; ++j) {
        d.z(i, j) = config.dataset_kind == ZDistribution::Bernoulli
                        ? (coin(rng) ? 1.0 : 0.0)
                        : normal(rng);
      }
      const bool positive = unit(rng) < positive_prob(d.z.row(i));
      d.y(i) = positive ? 1 : 2;
      for (int j = 0; j < config.d_x; ++j) {
        double mu = 0.0;
        if (j == 0) {
          mu = positive ? 1.0 : 0.0;
        } else if (j <= config.d_z) {
          mu = d.z(i, j - 1);
        }
        d.x(i, j) = mu + normal(rng);
      }
    }
    return d;
  };

  out.source = make(config.n_source,
                    [&](const auto &) { return config.source_cond_prob; });
  out.target = make(config.n_target, [&](const auto &z) {
    return sigmoid(out.theta0 + config.shift_slope * z.sum());
  });
  return out;
}

void GaussianGenConfig::validate() const {
  const int k = n_classes();
  if (k < 2) throw ValidationError("Gaussian family needs at least 2 classes");
  const auto p = mixing_matrix.rows();
  for (const auto &a : class_offsets) {
    if (a.size() != p) throw ValidationError("class offset length differs from rows of M");
  }
  conditional_params.validate();
  if (conditional_params.n_classes != k) {
    throw ValidationError("conditional model class count differs from offsets");
  }
  if (conditional_params.n_features() != mixing_matrix.cols()) {
    throw ValidationError("conditional model feature count differs from columns of M");
  }
}

LabeledDataset generate_gaussian_family(const GaussianGenConfig &config, int n,
                                        std::uint64_t seed) {
  config.validate();
  if (n < 1) throw ValidationError("sample size must be >= 1");
  const auto p = config.mixing_matrix.rows();
  const auto d = config.mixing_matrix.cols();
  const int k = config.n_classes();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  LabeledDataset out;
  out.n_classes = k;
  out.z.resize(n, d);
  out.x.resize(n, p);
  out.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out.z(i, j) = normal(rng);
  }
  const PosteriorMatrix prior = predict_proba(config.conditional_params, out.z);
  for (int i = 0; i < n; ++i) {
    const double u = unit(rng);
    double cum = 0.0;
    int label = k;
    for (int c = 0; c < k - 1; ++c) {
      cum += prior.probs(i, c);
      if (u < cum) {
        label = c + 1;
        break;
      }
    }
    out.y(i) = label;
    const Vector mean = config.mixing_matrix * out.z.row(i).transpose() +
                        config.class_offsets[label - 1];
    for (Eigen::Index j = 0; j < p; ++j) out.x(i, j) = mean(j) + normal(rng);
  }
  return out;
}

SoftmaxParams gaussian_family_posterior(const GaussianGenConfig &config) {
  config.validate();
  const auto p = config.mixing_matrix.rows();
  const auto d = config.mixing_matrix.cols();
  const int k = config.n_classes();
  const Vector &ref = config.class_offsets[k - 1];
  SoftmaxParams out = SoftmaxParams::zeros(k, static_cast<int>(p + d));
  for (int c = 0; c < k - 1; ++c) {
    const Vector &a = config.class_offsets[c];
    out.slopes.row(c).head(p) = (a - ref).transpose();
    out.slopes.row(c).tail(d) =
        (config.mixing_matrix.transpose() * (ref - a) +
         config.conditional_params.slopes.row(c).transpose())
            .transpose();
    out.intercepts(c) = 0.5 * (ref.squaredNorm() - a.squaredNorm()) +
                        config.conditional_params.intercepts(c);
  }
  return out;
}

void ShiftProtocolConfig::validate() const {
  if (!in_open_unit(base_rate)) throw ValidationError("base rate a must lie in (0, 1)");
  if (!in_open_unit(base_rate + shift_delta)) {
    throw ValidationError("a + k must lie in (0, 1)");
  }
  if (n_source < 1 || n_target < 1) throw ValidationError("sample sizes must be >= 1");
  if (conditioning_column < 0) throw ValidationError("conditioning_column must be >= 0");
}

std::pair<LabeledDataset, LabeledDataset> induce_conditional_shift(
    const LabeledDataset &data, const ShiftProtocolConfig &config) {
  config.validate();
  data.validate();
  if (data.n_classes != 2) throw ValidationError("shift protocol needs binary labels");
  if (config.conditioning_column >= data.dz()) {
    throw ValidationError("conditioning_column " +
                          std::to_string(config.conditioning_column) +
                          " outside the z block");
  }
  const auto zc = data.z.col(config.conditioning_column);

  // pools[y][z]: y index 0 = positive (class 1), 1 = negative.
  std::array<std::array<std::vector<Eigen::Index>, 2>, 2> pools;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double z = zc(i);
    if (z != 0.0 && z != 1.0) {
      throw ValidationError("conditioning column is not binary at row " +
                            std::to_string(i));
    }
    pools[data.y(i) == 1 ? 0 : 1][z == 1.0 ? 1 : 0].push_back(i);
  }
  const double pz1 =
      static_cast<double>(pools[0][1].size() + pools[1][1].size()) /
      static_cast<double>(data.rows());

  std::mt19937_64 rng(config.seed);
  auto draw = [&](int n, double rate0, double rate1) {
    const auto n1 = static_cast<int>(std::llround(n * pz1));
    const std::array<int, 2> stratum{n - n1, n1};
    const std::array<double, 2> rate{rate0, rate1};
    std::vector<Eigen::Index> rows;
    rows.reserve(n);
    for (int z = 0; z < 2; ++z) {
      const auto pos = static_cast<int>(std::llround(rate[z] * stratum[z]));
      const std::array<int, 2> want{pos, stratum[z] - pos};
      for (int y = 0; y < 2; ++y) {
        if (want[y] == 0) continue;
        const auto &pool = pools[y][z];
        if (pool.empty()) {
          throw ValidationError("empty stratum (y=" + std::string(y == 0 ? "1" : "2") +
                                ", z=" + std::to_string(z) + ")");
        }
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (int r = 0; r < want[y]; ++r) rows.push_back(pool[pick(rng)]);
      }
    }
    std::shuffle(rows.begin(), rows.end(), rng);

    LabeledDataset out;
    out.n_classes = 2;
    out.z.resize(n, data.dz());
    out.x.resize(n, data.dx());
    out.y.resize(n);
    if (data.sample_weights) out.sample_weights = Vector(n);
    for (int i = 0; i < n; ++i) {
      out.z.row(i) = data.z.row(rows[i]);
      out.x.row(i) = data.x.row(rows[i]);
      out.y(i) = data.y(rows[i]);
      if (data.sample_weights) (*out.sample_weights)(i) = (*data.sample_weights)(rows[i]);
    }
    return out;
  };

  LabeledDataset source = draw(config.n_source, config.base_rate, config.base_rate);
  LabeledDataset target = draw(config.n_target, config.base_rate,
                               config.base_rate + config.shift_delta);
  return {std::move(source), std::move(target)};
}

}  // namespace cpsm
