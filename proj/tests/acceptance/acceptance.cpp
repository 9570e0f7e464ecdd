// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include "cpsm/benchmark.hpp"
#include "cpsm/cli.hpp"
#include "cpsm/cps_adjust.hpp"
#include "cpsm/em.hpp"
#include "cpsm/eval.hpp"
#include "cpsm/io.hpp"
#include "cpsm/softmax.hpp"
#include "cpsm/synthgen.hpp"

#include "discrete_joint.hpp"
#include "stand_in.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace cpsm;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char *pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome discrete_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  double worst = 0.0;
  const int joints = 200;
  for (int i = 0; i < joints; ++i) {
    const auto cells = testing::enumerate_cells(testing::random_joint(rng, 2, 2, 2));
    const auto out = adjust_posterior(cells.source_posterior, {cells.q_cond, cells.p_cond});
    worst = std::max(worst,
                     (out.posterior.probs - cells.target_posterior.probs).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 1.0,
          fmt("%d joints, max error %.3g, %.3f s", joints, worst, secs)};
}

Outcome em_monotonicity() {
  const auto t0 = Clock::now();
  struct Case {
    ZDistribution kind;
    double q, k;
  };
  std::vector<Case> cases;
  for (auto kind : {ZDistribution::Bernoulli, ZDistribution::Gaussian}) {
    for (double q : {0.05, 0.3, 0.5, 0.8}) {
      for (int k = 0; k <= 5; ++k) cases.push_back({kind, q, static_cast<double>(k)});
    }
    cases.push_back({kind, 0.2, 2.5});
  }
  double worst_drop = 0.0;
  std::size_t longest = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    SynthConfig c;
    c.dataset_kind = cases[i].kind;
    c.n_source = c.n_target = 2000;
    c.target_prior = cases[i].q;
    c.shift_slope = cases[i].k;
    c.seed = i;
    const auto pair = generate_pair(c);
    const auto models = fit_source_models(pair.source, FitConfig{});
    EmConfig em;
    em.max_em_iters = 500;
    const auto fit = fit_cpsm(models, UnlabeledDataset::from(pair.target), em);
    longest = std::max(longest, fit.loglik_trace.size());
    for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t) {
      worst_drop = std::max(worst_drop, fit.loglik_trace[t - 1] - fit.loglik_trace[t]);
    }
  }
  const double secs = seconds_since(t0);
  return {worst_drop <= 1e-9 && secs < 120.0,
          fmt("%zu runs, largest decrease %.3g, longest trace %zu, %.1f s", cases.size(),
              worst_drop, longest, secs)};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> n_dist(1, 60), d_dist(0, 6), k_dist(2, 5);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = n_dist(rng), d = d_dist(rng), k = k_dist(rng);
    SoftmaxParams p = SoftmaxParams::zeros(k, d);
    for (Eigen::Index i = 0; i < p.intercepts.size(); ++i) p.intercepts(i) = normal(rng);
    for (Eigen::Index i = 0; i < p.slopes.size(); ++i) p.slopes.data()[i] = normal(rng);
    Matrix f(n, d);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = 2.0 * normal(rng);
    SoftTargets t{Matrix(n, k)};
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < k; ++c) t.probs(r, c) = unit(rng) + 0.01;
      t.probs.row(r) /= t.probs.row(r).sum();
    }
    Vector w(n);
    for (int r = 0; r < n; ++r) w(r) = 0.5 + unit(rng);

    const SoftmaxParams g = log_likelihood_gradient(p, f, t, w);
    const double h = 1e-6;
    auto rel_error = [&](double analytic, double &coord) {
      const double saved = coord;
      coord = saved + h;
      const double up = log_likelihood(p, f, t, w);
      coord = saved - h;
      const double down = log_likelihood(p, f, t, w);
      coord = saved;
      const double fd = (up - down) / (2.0 * h);
      return std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
    };
    for (Eigen::Index i = 0; i < p.intercepts.size(); ++i) {
      worst = std::max(worst, rel_error(g.intercepts(i), p.intercepts(i)));
    }
    for (Eigen::Index i = 0; i < p.slopes.size(); ++i) {
      worst = std::max(worst, rel_error(g.slopes.data()[i], p.slopes.data()[i]));
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-5 && secs < 10.0,
          fmt("100 instances, max relative error %.3g, %.3f s", worst, secs)};
}

// Mean balanced accuracy and approximation error per (method, n) for one
// synthetic cell.
struct CellMeans {
  std::map<std::pair<std::string, int>, double> ba, approx;
};

CellMeans synthetic_cell(double q, double k, std::vector<int> ns,
                         std::vector<Method> methods) {
  ExperimentConfig c;
  c.generator = SyntheticGenerator{};
  c.methods = std::move(methods);
  c.a_values = {q};
  c.k_values = {k};
  c.n_values = std::move(ns);
  c.repetitions = 5;
  c.threads = 0;
  CellMeans m;
  for (const auto &row : aggregate(run_benchmark(c))) {
    m.ba[{row.method, row.n}] = row.runs == 5 ? row.balanced_accuracy_mean : std::nan("");
    m.approx[{row.method, row.n}] = row.runs == 5 ? row.approx_error_mean : std::nan("");
  }
  return m;
}

Outcome no_shift() {
  auto m = synthetic_cell(0.05, 0.0, {5000}, {Method::Naive, Method::Mlls, Method::Cpsm});
  const double naive = m.ba[{"naive", 5000}], mlls = m.ba[{"mlls", 5000}],
               cpsm = m.ba[{"cpsm", 5000}];
  const double spread = std::max({naive, mlls, cpsm}) - std::min({naive, mlls, cpsm});
  return {spread <= 0.02, fmt("BA naive %.4f, mlls %.4f, cpsm %.4f, spread %.4f", naive, mlls,
                              cpsm, spread)};
}

Outcome label_shift() {
  auto m = synthetic_cell(0.5, 0.0, {5000}, {Method::Naive, Method::Mlls, Method::Cpsm});
  const double naive = m.ba[{"naive", 5000}], mlls = m.ba[{"mlls", 5000}],
               cpsm = m.ba[{"cpsm", 5000}];
  return {mlls - naive >= 0.05 && cpsm - naive >= 0.05,
          fmt("BA naive %.4f, mlls %.4f (%+.4f), cpsm %.4f (%+.4f); need +0.05", naive, mlls,
              mlls - naive, cpsm, cpsm - naive)};
}

Outcome conditional_shift() {
  auto m = synthetic_cell(0.05, 5.0, {5000}, {Method::Naive, Method::Mlls, Method::Cpsm});
  const double naive = m.ba[{"naive", 5000}], mlls = m.ba[{"mlls", 5000}],
               cpsm = m.ba[{"cpsm", 5000}];
  return {cpsm - naive >= 0.10 && cpsm - mlls >= 0.10,
          fmt("BA naive %.4f, mlls %.4f, cpsm %.4f (%+.4f vs naive, %+.4f vs mlls)", naive,
              mlls, cpsm, cpsm - naive, cpsm - mlls)};
}

Outcome approximation_trend() {
  const std::vector<int> ns{500, 1000, 2000, 5000, 10000};
  auto m = synthetic_cell(0.5, 5.0, ns, {Method::Naive, Method::Cpsm, Method::Oracle});
  std::string series;
  int violations = 0;
  bool large_violation = false;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double e = m.approx[{"cpsm", ns[i]}];
    series += fmt("%s%d:%.4f", i ? " " : "", ns[i], e);
    if (i > 0) {
      const double rise = e - m.approx[{"cpsm", ns[i - 1]}];
      if (rise > 0.0 || std::isnan(rise)) {
        ++violations;
        if (!(rise <= 0.01)) large_violation = true;
      }
    }
  }
  const double naive = m.approx[{"naive", 10000}], cpsm = m.approx[{"cpsm", 10000}];
  return {violations <= 1 && !large_violation && naive - cpsm >= 0.05,
          fmt("cpsm error %s; naive at 10000 %.4f (gap %.4f)", series.c_str(), naive,
              naive - cpsm)};
}

Outcome oracle_consistency() {
  GaussianGenConfig g;
  g.mixing_matrix = Matrix(3, 2);
  g.mixing_matrix << 0.8, -0.4, 0.3, 0.6, -0.5, 0.2;
  g.class_offsets = {Vector(3), Vector(3), Vector(3)};
  g.class_offsets[0] << 1.5, 0.0, -0.5;
  g.class_offsets[1] << -0.5, 1.0, 0.5;
  g.class_offsets[2] << 0.0, -1.0, 0.0;
  g.conditional_params = SoftmaxParams::zeros(3, 2);
  g.conditional_params.intercepts << 0.3, -0.2;
  g.conditional_params.slopes << 1.0, -0.5, -0.7, 0.8;

  const LabeledDataset train = generate_gaussian_family(g, 50000, 11);
  const SoftmaxParams fitted = fit_hard(train, FeatureBlock::Full, FitConfig{});
  const LabeledDataset eval = generate_gaussian_family(g, 20000, 12);
  const Matrix f = features(eval, FeatureBlock::Full);
  const Matrix gap = (predict_proba(fitted, f).probs -
                      predict_proba(gaussian_family_posterior(g), f).probs)
                         .cwiseAbs();
  const double mean_gap = gap.mean();
  return {mean_gap < 0.01, fmt("mean absolute posterior gap %.5f", mean_gap)};
}

Outcome mlls_reduction() {
  SynthConfig c;
  c.n_source = c.n_target = 2000;
  c.target_prior = 0.3;
  c.shift_slope = 2.0;
  c.seed = 3;
  const auto pair = generate_pair(c);
  const auto models = fit_source_models(pair.source, FitConfig{});
  const Vector prior = class_frequencies(pair.source);
  const auto target = UnlabeledDataset::from(pair.target);
  const auto mlls = fit_mlls(models.posterior_model, prior, target, EmConfig{});
  const SourceModels folded_models{models.posterior_model, SoftmaxParams::from_prior(prior)};
  const UnlabeledDataset folded{Matrix(target.rows(), 0), full_features(target.x, target.z)};
  const auto cpsm = fit_cpsm(folded_models, folded, EmConfig{});
  const bool same = mlls.loglik_trace == cpsm.loglik_trace &&
                    mlls.estimated_prior == cpsm.estimated_prior &&
                    mlls.target_posterior.probs == cpsm.target_posterior.probs;
  return {same, fmt("%zu trace entries, prior %.6f, %s", mlls.loglik_trace.size(),
                    mlls.estimated_prior(0), same ? "bitwise equal" : "differ")};
}

Outcome calibration() {
  double worst = 0.0;
  int cells = 0;
  for (double q : {0.05, 0.3, 0.5, 0.8}) {
    for (int k = 0; k <= 5; ++k) {
      const double theta0 = calibrate_intercept(k, q, ZDistribution::Bernoulli, 5);
      // Independent enumeration: the sum of five fair coins is Binomial(5, 1/2).
      double expected = 0.0;
      for (int s = 0; s <= 5; ++s) {
        const double weight = std::tgamma(6) / (std::tgamma(s + 1) * std::tgamma(6 - s)) / 32.0;
        expected += weight / (1.0 + std::exp(-(theta0 + k * s)));
      }
      worst = std::max(worst, std::abs(expected - q));
      ++cells;
    }
  }
  return {worst <= 1e-4, fmt("%d cells, max |E[q] - target| %.3g", cells, worst)};
}

Outcome shift_inducer() {
  const LabeledDataset data = testing::stand_in_dataset(20000, 5);
  ShiftProtocolConfig c;
  c.base_rate = 0.05;
  c.shift_delta = 0.7;
  c.n_source = c.n_target = 5000;
  c.seed = 9;
  const auto [source, target] = induce_conditional_shift(data, c);
  auto rate = [](const LabeledDataset &d, double z) {
    int pos = 0, total = 0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      if (d.z(i, 0) != z) continue;
      ++total;
      pos += d.y(i) == 1;
    }
    return static_cast<double>(pos) / total;
  };
  const double q1 = rate(target, 1.0), p0 = rate(source, 0.0), p1 = rate(source, 1.0);
  return {std::abs(q1 - 0.75) <= 0.02 && std::abs(p0 - 0.05) <= 0.01 &&
              std::abs(p1 - 0.05) <= 0.01,
          fmt("q(y=1|z=1) %.4f, p(y=1|z=0) %.4f, p(y=1|z=1) %.4f", q1, p0, p1)};
}

Outcome benchmark_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "cpsm_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  io::write_file(dir / "config.json", R"({
    "generator": {"type": "synthetic", "dataset_kind": "gaussian_z"},
    "methods": ["naive", "mlls", "cpsm", "oracle"],
    "grid": {"target_prior": [0.05, 0.5], "k": [0, 3], "n": [500]},
    "repetitions": 2, "base_seed": 42, "threads": 0,
    "output_path": "metrics.csv"
  })");
  std::vector<std::string> csvs;
  for (int run = 0; run < 2; ++run) {
    std::ostringstream out, err;
    const int code = cli::run({"benchmark", (dir / "config.json").string()}, out, err);
    if (code != 0) return {false, "benchmark exited with " + std::to_string(code) + ": " + err.str()};
    csvs.push_back(io::read_file(dir / "metrics.csv"));
  }
  fs::remove_all(dir);
  const auto rows = std::count(csvs[0].begin(), csvs[0].end(), '\n') - 1;
  return {csvs[0] == csvs[1], fmt("%ld rows, %s", static_cast<long>(rows),
                                  csvs[0] == csvs[1] ? "byte-identical" : "files differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
      {"adjustment exact on discrete joints", discrete_exactness},
      {"EM surrogate log-likelihood monotone", em_monotonicity},
      {"softmax gradient matches finite differences", gradient_check},
      {"no shift: methods agree within 0.02", no_shift},
      {"label shift: MLLS and CPSM beat NAIVE by 0.05", label_shift},
      {"conditional shift: CPSM beats NAIVE and MLLS by 0.10", conditional_shift},
      {"approximation error shrinks with n", approximation_trend},
      {"fitted posterior matches closed form", oracle_consistency},
      {"MLLS equals CPSM without conditioning features", mlls_reduction},
      {"intercept calibration within 1e-4", calibration},
      {"shift inducer hits target rates", shift_inducer},
      {"benchmark output is deterministic", benchmark_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
