#include "cpsm/benchmark.hpp"

#include "cpsm/error.hpp"
#include "cpsm/io.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

namespace cpsm {

std::string to_string(Method m) {
  switch (m) {
    case Method::Naive:
      return "naive";
    case Method::Mlls:
      return "mlls";
    case Method::Cpsm:
      return "cpsm";
    case Method::Oracle:
      return "oracle";
  }
  return "unknown";
}

int parse_conditioning_column(const std::string &name) {
  int index = 0;
  const char *first = name.data() + 1;
  const char *last = name.data() + name.size();
  if (name.size() < 2 || name[0] != 'z' || std::from_chars(first, last, index).ptr != last ||
      index < 1) {
    throw ValidationError("conditioning_column must name a z column such as 'z1', got '" +
                          name + "'");
  }
  return index - 1;
}

Method parse_method(const std::string &s) {
  if (s == "naive") return Method::Naive;
  if (s == "mlls") return Method::Mlls;
  if (s == "cpsm") return Method::Cpsm;
  if (s == "oracle") return Method::Oracle;
  throw ValidationError("unknown method '" + s + "' (expected naive, mlls, cpsm or oracle)");
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ValidationError("methods must be nonempty");
  if (a_values.empty() || k_values.empty() || n_values.empty()) {
    throw ValidationError("every grid axis (a, k, n) must be nonempty");
  }
  if (repetitions < 1) throw ValidationError("repetitions must be >= 1");
  if (threads < 0) throw ValidationError("threads must be >= 0");
  for (int n : n_values) {
    if (n < 2) throw ValidationError("grid sample sizes must be >= 2");
  }
  em.validate();
  fit.validate();
}

namespace {

using nlohmann::json;

template <typename T>
void read_opt(const json &j, const char *key, T &out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

FitConfig parse_fit(const json &j, FitConfig cfg) {
  read_opt(j, "max_iters", cfg.max_iters);
  read_opt(j, "step_size", cfg.step_size);
  read_opt(j, "tolerance", cfg.tolerance);
  read_opt(j, "l2_penalty", cfg.l2_penalty);
  read_opt(j, "seed", cfg.seed);
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::pair<LabeledDataset, LabeledDataset> make_data(const ExperimentConfig &config,
                                                    double a, double k, int n,
                                                    std::uint64_t seed) {
  if (const auto *synth = std::get_if<SyntheticGenerator>(&config.generator)) {
    SynthConfig sc;
    sc.dataset_kind = synth->dataset_kind;
    sc.n_source = n;
    sc.n_target = n;
    sc.d_z = synth->d_z;
    sc.d_x = synth->d_x;
    sc.source_cond_prob = synth->source_cond_prob;
    sc.shift_slope = k;
    sc.target_prior = a;
    sc.seed = seed;
    sc.calibration_seed = synth->calibration_seed;
    auto pair = generate_pair(sc);
    return {std::move(pair.source), std::move(pair.target)};
  }
  const auto &proto = std::get<ShiftProtocolGenerator>(config.generator);
  ShiftProtocolConfig pc;
  pc.base_rate = a;
  pc.shift_delta = k;
  pc.conditioning_column = proto.conditioning_column;
  pc.n_source = n;
  pc.n_target = n;
  pc.seed = seed;
  return induce_conditional_shift(proto.data, pc);
}

}  // namespace

ExperimentConfig parse_experiment_config(const nlohmann::json &j,
                                         const std::filesystem::path &base_dir) {
  try {
    ExperimentConfig cfg;
    const json &gen = j.at("generator");
    const std::string type = gen.value("type", std::string("synthetic"));
    if (type == "synthetic") {
      SyntheticGenerator g;
      g.dataset_kind =
          parse_z_distribution(gen.value("dataset_kind", std::string("bernoulli_z")));
      read_opt(gen, "d_z", g.d_z);
      read_opt(gen, "d_x", g.d_x);
      read_opt(gen, "source_cond_prob", g.source_cond_prob);
      read_opt(gen, "calibration_seed", g.calibration_seed);
      cfg.generator = g;
    } else if (type == "shift_protocol") {
      ShiftProtocolGenerator g;
      std::filesystem::path data = gen.at("data").get<std::string>();
      if (data.is_relative()) data = base_dir / data;
      g.data = io::read_dataset_csv(data).labeled();
      if (gen.contains("conditioning_column")) {
        g.conditioning_column = parse_conditioning_column(gen.at("conditioning_column").get<std::string>());
      }
      cfg.generator = std::move(g);
    } else {
      throw ValidationError("unknown generator type '" + type + "'");
    }

    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto &m : j.at("methods")) cfg.methods.push_back(parse_method(m.get<std::string>()));
    }
    const json &grid = j.at("grid");
    if (grid.contains("a")) {
      cfg.a_values = grid.at("a").get<std::vector<double>>();
    } else {
      cfg.a_values = grid.at("target_prior").get<std::vector<double>>();
    }
    cfg.k_values = grid.at("k").get<std::vector<double>>();
    cfg.n_values = grid.at("n").get<std::vector<int>>();
    if (j.contains("fit")) cfg.fit = parse_fit(j.at("fit"), cfg.fit);
    if (j.contains("em")) {
      const json &em = j.at("em");
      read_opt(em, "max_em_iters", cfg.em.max_em_iters);
      read_opt(em, "em_tolerance", cfg.em.em_tolerance);
      if (em.contains("inner")) cfg.em.inner = parse_fit(em.at("inner"), cfg.em.inner);
    }
    read_opt(j, "repetitions", cfg.repetitions);
    read_opt(j, "base_seed", cfg.base_seed);
    read_opt(j, "output_path", cfg.output_path);
    if (j.contains("aggregate_path")) cfg.aggregate_path = j.at("aggregate_path").get<std::string>();
    read_opt(j, "record_wall_clock", cfg.record_wall_clock);
    read_opt(j, "threads", cfg.threads);
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path &path) {
  const std::string text = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

std::vector<MetricRow> run_single(const ExperimentConfig &config, double a, double k,
                                  int n, std::uint64_t seed) {
  std::vector<MetricRow> rows;
  auto base_row = [&](Method m) {
    MetricRow r;
    r.method = to_string(m);
    r.a = a;
    r.k = k;
    r.n = n;
    r.seed = seed;
    return r;
  };
  try {
    using clock = std::chrono::steady_clock;
    auto [source, target] = make_data(config, a, k, n, seed);
    const UnlabeledDataset target_x = UnlabeledDataset::from(target);

    auto t0 = clock::now();
    const SoftmaxParams posterior_model = fit_hard(source, FeatureBlock::Full, config.fit);
    const double posterior_secs = seconds_since(t0);

    t0 = clock::now();
    const PosteriorMatrix oracle = fit_oracle(target, config.fit);
    const double oracle_secs = seconds_since(t0);

    for (Method m : config.methods) {
      double secs = posterior_secs;
      PosteriorMatrix posterior;
      t0 = clock::now();
      switch (m) {
        case Method::Naive:
          posterior = predict_proba(posterior_model, features(target_x, FeatureBlock::Full));
          break;
        case Method::Mlls:
          posterior = fit_mlls(posterior_model, class_frequencies(source), target_x, config.em)
                          .target_posterior;
          break;
        case Method::Cpsm: {
          const SourceModels models{
              posterior_model, fit_hard(source, FeatureBlock::Conditioning, config.fit)};
          posterior = fit_cpsm(models, target_x, config.em).target_posterior;
          break;
        }
        case Method::Oracle:
          posterior = oracle;
          secs = oracle_secs;
          break;
      }
      secs += seconds_since(t0);
      MetricRow r = base_row(m);
      r.balanced_accuracy =
          balanced_accuracy(target.y, classify_at_estimated_prior(posterior), 2);
      r.approx_error = approximation_error(posterior, oracle);
      r.wall_clock_seconds = config.record_wall_clock ? secs : 0.0;
      rows.push_back(std::move(r));
    }
  } catch (const std::exception &e) {
    rows.clear();
    for (Method m : config.methods) {
      MetricRow r = base_row(m);
      r.balanced_accuracy = std::nan("");
      r.approx_error = std::nan("");
      r.error = e.what();
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

std::vector<MetricRow> run_benchmark(const ExperimentConfig &config) {
  config.validate();
  struct Run {
    double a, k;
    int n;
    std::uint64_t seed;
  };
  std::vector<Run> runs;
  for (double a : config.a_values) {
    for (double k : config.k_values) {
      for (int n : config.n_values) {
        for (int r = 0; r < config.repetitions; ++r) {
          runs.push_back({a, k, n, config.base_seed + runs.size()});
        }
      }
    }
  }

  std::vector<std::vector<MetricRow>> results(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      const Run &r = runs[i];
      results[i] = run_single(config, r.a, r.k, r.n, r.seed);
    }
  };
  unsigned n_threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                           : static_cast<unsigned>(config.threads);
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(runs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  std::vector<MetricRow> rows;
  for (auto &r : results) {
    for (auto &row : r) rows.push_back(std::move(row));
  }
  canonical_sort(rows);
  return rows;
}

void canonical_sort(std::vector<MetricRow> &rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const MetricRow &l, const MetricRow &r) {
    return std::tie(l.a, l.k, l.n, l.method, l.seed) <
           std::tie(r.a, r.k, r.n, r.method, r.seed);
  });
}

std::string metrics_csv(const std::vector<MetricRow> &rows) {
  std::ostringstream out;
  out << "method,a,k,n,seed,balanced_accuracy,approx_error,wall_clock_seconds\n";
  for (const auto &r : rows) {
    out << r.method << ',' << io::format_double(r.a) << ',' << io::format_double(r.k)
        << ',' << r.n << ',' << r.seed << ',' << io::format_double(r.balanced_accuracy)
        << ',' << io::format_double(r.approx_error) << ','
        << io::format_double(r.wall_clock_seconds) << '\n';
  }
  return out.str();
}

std::vector<AggregateRow> aggregate(const std::vector<MetricRow> &rows) {
  using Key = std::tuple<double, double, int, std::string>;
  std::map<Key, std::vector<const MetricRow *>> groups;
  for (const auto &r : rows) groups[{r.a, r.k, r.n, r.method}].push_back(&r);

  std::vector<AggregateRow> out;
  for (const auto &[key, members] : groups) {
    AggregateRow agg;
    std::tie(agg.a, agg.k, agg.n, agg.method) = key;
    std::vector<const MetricRow *> ok;
    for (const auto *m : members) {
      if (m->error) {
        ++agg.failed;
      } else {
        ok.push_back(m);
      }
    }
    agg.runs = static_cast<int>(ok.size());
    auto mean_std = [&](auto field, double &mean, double &sd) {
      if (ok.empty()) {
        mean = sd = std::nan("");
        return;
      }
      double s = 0.0;
      for (const auto *m : ok) s += m->*field;
      mean = s / static_cast<double>(ok.size());
      double ss = 0.0;
      for (const auto *m : ok) ss += (m->*field - mean) * (m->*field - mean);
      sd = ok.size() > 1 ? std::sqrt(ss / static_cast<double>(ok.size() - 1)) : 0.0;
    };
    double unused = 0.0;
    mean_std(&MetricRow::balanced_accuracy, agg.balanced_accuracy_mean,
             agg.balanced_accuracy_std);
    mean_std(&MetricRow::approx_error, agg.approx_error_mean, agg.approx_error_std);
    mean_std(&MetricRow::wall_clock_seconds, agg.wall_clock_mean, unused);
    out.push_back(std::move(agg));
  }
  return out;
}

std::string aggregate_csv(const std::vector<AggregateRow> &rows) {
  std::ostringstream out;
  out << "method,a,k,n,runs,failed,balanced_accuracy_mean,balanced_accuracy_std,"
         "approx_error_mean,approx_error_std,wall_clock_mean\n";
  for (const auto &r : rows) {
    out << r.method << ',' << io::format_double(r.a) << ',' << io::format_double(r.k)
        << ',' << r.n << ',' << r.runs << ',' << r.failed << ','
        << io::format_double(r.balanced_accuracy_mean) << ','
        << io::format_double(r.balanced_accuracy_std) << ','
        << io::format_double(r.approx_error_mean) << ','
        << io::format_double(r.approx_error_std) << ','
        << io::format_double(r.wall_clock_mean) << '\n';
  }
  return out.str();
}

}  // namespace cpsm
