#include "cpsm/cli.hpp"

#include "cpsm/benchmark.hpp"
#include "cpsm/em.hpp"
#include "cpsm/error.hpp"
#include "cpsm/eval.hpp"
#include "cpsm/io.hpp"
#include "cpsm/synthgen.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>

namespace cpsm::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

template <typename T>
void read_opt(const json &j, const char *key, T &out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

json parse_json_file(const fs::path &path) {
  const std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void ensure_dir(const fs::path &dir) {
  std::error_code ec;
  if (!dir.empty()) fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

void print_split(std::ostream &out, const char *name, const LabeledDataset &d) {
  const Vector freq = class_frequencies(d);
  out << name << ": " << d.rows() << " rows, d_z=" << d.dz() << ", d_x=" << d.dx()
      << ", P(y=1)=" << freq(0) << '\n';
}

void cmd_generate(const fs::path &config_path, std::ostream &out) {
  const json j = parse_json_file(config_path);
  try {
    const std::string kind = j.value("generator", std::string("synthetic"));
    fs::path dir = j.value("output_dir", std::string("."));
    if (dir.is_relative()) dir = config_path.parent_path() / dir;
    LabeledDataset source, target;
    if (kind == "synthetic") {
      SynthConfig c;
      c.dataset_kind =
          parse_z_distribution(j.value("dataset_kind", std::string("bernoulli_z")));
      read_opt(j, "n_source", c.n_source);
      read_opt(j, "n_target", c.n_target);
      read_opt(j, "d_z", c.d_z);
      read_opt(j, "d_x", c.d_x);
      read_opt(j, "source_cond_prob", c.source_cond_prob);
      read_opt(j, "shift_slope", c.shift_slope);
      read_opt(j, "target_prior", c.target_prior);
      read_opt(j, "seed", c.seed);
      read_opt(j, "calibration_seed", c.calibration_seed);
      auto pair = generate_pair(c);
      out << "synthetic " << to_string(c.dataset_kind) << ", k=" << c.shift_slope
          << ", q(y=1)=" << c.target_prior << ", theta0=" << pair.theta0 << '\n';
      source = std::move(pair.source);
      target = std::move(pair.target);
    } else if (kind == "shift_protocol") {
      ShiftProtocolConfig c;
      fs::path input = j.at("input").get<std::string>();
      if (input.is_relative()) input = config_path.parent_path() / input;
      const LabeledDataset data = io::read_dataset_csv(input).labeled();
      if (j.contains("conditioning_column")) {
        c.conditioning_column =
            parse_conditioning_column(j.at("conditioning_column").get<std::string>());
      }
      read_opt(j, "base_rate", c.base_rate);
      read_opt(j, "shift_delta", c.shift_delta);
      read_opt(j, "n_source", c.n_source);
      read_opt(j, "n_target", c.n_target);
      read_opt(j, "seed", c.seed);
      std::tie(source, target) = induce_conditional_shift(data, c);
      out << "shift protocol a=" << c.base_rate << ", k=" << c.shift_delta << '\n';
    } else {
      throw ValidationError("unknown generator '" + kind + "'");
    }
    ensure_dir(dir);
    io::write_dataset_csv(dir / "source.csv", source);
    io::write_dataset_csv(dir / "target.csv", UnlabeledDataset::from(target));
    io::write_labels_csv(dir / "target_labels.csv", target.y);
    print_split(out, "source", source);
    print_split(out, "target", target);
    out << "wrote " << (dir / "source.csv").string() << ", "
        << (dir / "target.csv").string() << ", "
        << (dir / "target_labels.csv").string() << '\n';
  } catch (const json::exception &e) {
    throw ValidationError(config_path.string() + ": " + e.what());
  }
}

struct AdaptOptions {
  std::string source;
  std::string target;
  std::string method = "cpsm";
  std::uint64_t seed = 0;
  int max_em_iters = EmConfig{}.max_em_iters;
  double em_tolerance = EmConfig{}.em_tolerance;
  std::string output = ".";
};

void cmd_adapt(const AdaptOptions &opt, std::ostream &out) {
  const Method method = parse_method(opt.method);
  if (method == Method::Oracle) {
    throw ValidationError("adapt supports naive, mlls and cpsm");
  }
  const io::CsvDataset source_csv = io::read_dataset_csv(fs::path(opt.source));
  const io::CsvDataset target_csv = io::read_dataset_csv(fs::path(opt.target));
  if (source_csv.z.cols() != target_csv.z.cols() ||
      source_csv.x.cols() != target_csv.x.cols()) {
    throw ValidationError("schema mismatch: source has " +
                          std::to_string(source_csv.z.cols()) + " z / " +
                          std::to_string(source_csv.x.cols()) + " x columns, target has " +
                          std::to_string(target_csv.z.cols()) + " z / " +
                          std::to_string(target_csv.x.cols()));
  }
  const LabeledDataset source = source_csv.labeled();
  const UnlabeledDataset target = target_csv.unlabeled();

  FitConfig fit;
  fit.seed = opt.seed;
  EmConfig em;
  em.max_em_iters = opt.max_em_iters;
  em.em_tolerance = opt.em_tolerance;
  em.inner.seed = opt.seed;

  const SourceModels models = fit_source_models(source, fit);
  CpsmFit result;
  switch (method) {
    case Method::Naive:
      result.theta_hat = models.conditional_model;
      result.target_posterior = naive_posterior(models, target);
      result.estimated_prior = column_mean(result.target_posterior.probs);
      break;
    case Method::Mlls:
      result = fit_mlls(models.posterior_model, class_frequencies(source), target, em);
      break;
    default:
      result = fit_cpsm(models, target, em);
      break;
  }

  json doc = io::to_json(result);
  doc["method"] = to_string(method);
  doc["seed"] = opt.seed;
  doc["source_models"] = {{"posterior_model", io::to_json(models.posterior_model)},
                          {"conditional_model", io::to_json(models.conditional_model)}};

  const fs::path dir = opt.output;
  ensure_dir(dir);
  io::write_file(dir / "fit.json", doc.dump(2) + "\n");
  io::write_posterior_csv(dir / "posterior.csv", result.target_posterior);
  out << to_string(method) << ": " << target.rows() << " target rows, "
      << result.iterations_run << " EM iterations, estimated q(y=1)="
      << result.estimated_prior(0) << '\n'
      << "wrote " << (dir / "fit.json").string() << ", "
      << (dir / "posterior.csv").string() << '\n';
}

void cmd_benchmark(const fs::path &config_path, const std::optional<std::string> &output,
                   const std::optional<std::string> &aggregate_path, std::ostream &out) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  // Paths from the config file are relative to it; command-line paths are
  // taken as given.
  auto from_config = [&](const std::string &p) {
    const fs::path path = p;
    return path.is_relative() ? config_path.parent_path() / path : path;
  };
  const auto rows = run_benchmark(cfg);
  std::size_t failed = 0;
  for (const auto &r : rows) {
    if (r.error) {
      ++failed;
      out << "error in run (a=" << r.a << ", k=" << r.k << ", n=" << r.n
          << ", seed=" << r.seed << ", " << r.method << "): " << *r.error << '\n';
    }
  }
  const fs::path metrics_path = output ? fs::path(*output) : from_config(cfg.output_path);
  io::write_file(metrics_path, metrics_csv(rows));
  out << "wrote " << rows.size() << " metric rows (" << failed << " failed) to "
      << metrics_path.string() << '\n';
  if (aggregate_path || cfg.aggregate_path) {
    const fs::path agg_path = aggregate_path ? fs::path(*aggregate_path)
                                             : from_config(*cfg.aggregate_path);
    io::write_file(agg_path, aggregate_csv(aggregate(rows)));
    out << "wrote aggregates to " << agg_path.string() << '\n';
  }
}

void cmd_evaluate(const std::string &posterior_path, const std::string &labels_path,
                  const std::optional<std::string> &oracle_path, std::ostream &out) {
  const PosteriorMatrix posterior = io::read_posterior_csv(posterior_path);
  const Labels y = io::read_labels_csv(labels_path);
  if (y.size() != posterior.rows()) {
    throw ValidationError("posterior has " + std::to_string(posterior.rows()) +
                          " rows, labels " + std::to_string(y.size()));
  }
  const Vector prior = column_mean(posterior.probs);
  const Labels pred = posterior.n_classes() == 2 ? classify_at_estimated_prior(posterior)
                                                 : argmax_labels(posterior);
  out << "estimated_prior_class1," << io::format_double(prior(0)) << '\n'
      << "balanced_accuracy,"
      << io::format_double(balanced_accuracy(y, pred, posterior.n_classes())) << '\n';
  if (oracle_path) {
    const PosteriorMatrix oracle = io::read_posterior_csv(*oracle_path);
    out << "approx_error," << io::format_double(approximation_error(posterior, oracle))
        << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Conditional probability shift adaptation"};
  app.require_subcommand(1);

  std::string generate_config;
  auto *generate = app.add_subcommand("generate", "Write source/target CSVs from a config");
  generate->add_option("config", generate_config, "Generator JSON")->required();

  AdaptOptions adapt_opt;
  auto *adapt = app.add_subcommand("adapt", "Fit source models and adapt to a target CSV");
  adapt->add_option("--source", adapt_opt.source, "Labeled source CSV")->required();
  adapt->add_option("--target", adapt_opt.target, "Unlabeled target CSV")->required();
  adapt->add_option("--method", adapt_opt.method, "naive, mlls or cpsm")
      ->capture_default_str();
  adapt->add_option("--seed", adapt_opt.seed, "Recorded in the fit document")
      ->capture_default_str();
  adapt->add_option("--max-em-iters", adapt_opt.max_em_iters)->capture_default_str();
  adapt->add_option("--em-tolerance", adapt_opt.em_tolerance)->capture_default_str();
  adapt->add_option("--output", adapt_opt.output, "Output directory")->capture_default_str();

  std::string bench_config;
  std::optional<std::string> bench_output, bench_aggregate;
  auto *bench = app.add_subcommand("benchmark", "Run a benchmark sweep");
  bench->add_option("config", bench_config, "Experiment JSON")->required();
  bench->add_option("--output", bench_output, "Metrics CSV (overrides output_path)");
  bench->add_option("--aggregate", bench_aggregate, "Per-cell mean/std CSV");

  std::string eval_posterior, eval_labels;
  std::optional<std::string> eval_oracle;
  auto *evaluate = app.add_subcommand("evaluate", "Score a posterior CSV against labels");
  evaluate->add_option("--posterior", eval_posterior)->required();
  evaluate->add_option("--labels", eval_labels)->required();
  evaluate->add_option("--oracle", eval_oracle, "Oracle posterior CSV");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*generate) cmd_generate(generate_config, out);
    if (*adapt) cmd_adapt(adapt_opt, out);
    if (*bench) cmd_benchmark(bench_config, bench_output, bench_aggregate, out);
    if (*evaluate) cmd_evaluate(eval_posterior, eval_labels, eval_oracle, out);
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace cpsm::cli
