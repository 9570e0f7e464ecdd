#pragma once

#include "cpsm/em.hpp"
#include "cpsm/eval.hpp"
#include "cpsm/softmax.hpp"
#include "cpsm/synthgen.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cpsm {

enum class Method { Naive, Mlls, Cpsm, Oracle };

std::string to_string(Method m);
Method parse_method(const std::string &s);

/// Index into the z block for a column name "z1", "z2", ...
int parse_conditioning_column(const std::string &name);

/// Synthetic source/target pairs; the grid's `a` axis is the target prior
/// q(y=1).
struct SyntheticGenerator {
  ZDistribution dataset_kind = ZDistribution::Bernoulli;
  int d_z = 5;
  int d_x = 10;
  double source_cond_prob = 0.05;
  std::uint64_t calibration_seed = 0;
};

/// Conditional-shift resampling of a labeled dataset; the grid's `a` axis
/// is the base rate.
struct ShiftProtocolGenerator {
  LabeledDataset data;
  int conditioning_column = 0;
};

/// One benchmark sweep: every (a, k, n) grid cell is run `repetitions`
/// times. Run r of cell c uses seed base_seed + c * repetitions + r, and all
/// methods of a run share its data.
struct ExperimentConfig {
  std::variant<SyntheticGenerator, ShiftProtocolGenerator> generator;
  std::vector<Method> methods{Method::Naive, Method::Mlls, Method::Cpsm, Method::Oracle};
  std::vector<double> a_values;
  std::vector<double> k_values;
  std::vector<int> n_values;
  EmConfig em;
  FitConfig fit;
  int repetitions = 5;
  std::uint64_t base_seed = 0;
  std::string output_path = "metrics.csv";
  std::optional<std::string> aggregate_path;
  /// Off by default: the wall_clock_seconds column is then written as 0 and
  /// repeated sweeps produce byte-identical files.
  bool record_wall_clock = false;
  /// Worker threads; 0 means one per hardware thread.
  int threads = 1;

  std::size_t n_cells() const {
    return a_values.size() * k_values.size() * n_values.size();
  }
  void validate() const;
};

/// Parses the JSON document; relative data paths resolve against
/// `base_dir`. Malformed documents raise ValidationError.
ExperimentConfig parse_experiment_config(const nlohmann::json &j,
                                         const std::filesystem::path &base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path &path);

/// Every configured method on one generated (source, target) pair. A failure
/// anywhere yields one error row per method instead of throwing.
std::vector<MetricRow> run_single(const ExperimentConfig &config, double a, double k,
                                  int n, std::uint64_t seed);

/// Full sweep, rows in canonical (a, k, n, method, seed) order.
std::vector<MetricRow> run_benchmark(const ExperimentConfig &config);

void canonical_sort(std::vector<MetricRow> &rows);

/// `method,a,k,n,seed,balanced_accuracy,approx_error,wall_clock_seconds`;
/// error rows carry nan metrics.
std::string metrics_csv(const std::vector<MetricRow> &rows);

struct AggregateRow {
  std::string method;
  double a = 0.0;
  double k = 0.0;
  int n = 0;
  int runs = 0;
  int failed = 0;
  double balanced_accuracy_mean = 0.0;
  double balanced_accuracy_std = 0.0;
  double approx_error_mean = 0.0;
  double approx_error_std = 0.0;
  double wall_clock_mean = 0.0;
};

/// Mean and sample standard deviation per (method, a, k, n) over the
/// successful runs.
std::vector<AggregateRow> aggregate(const std::vector<MetricRow> &rows);
std::string aggregate_csv(const std::vector<AggregateRow> &rows);

}  // namespace cpsm
